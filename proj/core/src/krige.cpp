#include "recbayes/krige.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "recbayes/design.hpp"
#include "recbayes/detail/parallel.hpp"
#include "recbayes/samplers.hpp"
#include "recbayes/stats.hpp"

namespace recbayes::krige {

namespace {

using mcmc::Variant;

int find_param(const std::vector<std::string>& names, const std::string& n) {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == n) return static_cast<int>(i);
  return -1;
}

// column lookup of every parameter the predictor needs; -1 when the variant
// does not carry it
struct ParamView {
  int beta0 = -1;
  std::array<int, design::kNumCovariates> beta{};
  int beta0_d1 = -1, b_d1_tr = -1, b_d1_lag = -1;
  int beta0_d2 = -1, b_d2_tr = -1, b_d2_lag = -1;
  int sig0 = -1, sig0_d1 = -1, sig0_d2 = -1, phi = -1, w_year0 = -1;

  static ParamView build(const mcmc::PosteriorDraws& draws) {
    ParamView pv;
    const auto& nm = draws.param_names;
    pv.beta0 = find_param(nm, "beta0");
    for (int j = 0; j < design::kNumCovariates; ++j)
      pv.beta[j] = find_param(
          nm, std::string("beta[") + design::kCovariateNames[j] + "]");
    pv.beta0_d1 = find_param(nm, "beta0_d1");
    pv.b_d1_tr = find_param(nm, "beta_d1[trend1]");
    pv.b_d1_lag = find_param(nm, "beta_d1[lag]");
    pv.beta0_d2 = find_param(nm, "beta0_d2");
    pv.b_d2_tr = find_param(nm, "beta_d2[trend1]");
    pv.b_d2_lag = find_param(nm, "beta_d2[lag]");
    pv.sig0 = find_param(nm, "sigma0_sq");
    pv.sig0_d1 = find_param(nm, "sigma0_sq_d1");
    pv.sig0_d2 = find_param(nm, "sigma0_sq_d2");
    pv.phi = find_param(nm, "phi0");
    pv.w_year0 = find_param(nm, "w_year[2]");
    return pv;
  }
};

// linear-predictor evaluation for one draw at a target location
struct Predictor {
  const mcmc::DrawsMeta& meta;
  ParamView pv;

  double eta_main(const Eigen::VectorXd& par, int t, int d, double l1,
                  double l2, double log_dist, double random) const {
    std::array<double, design::kNumCovariates> row{};
    design::build_design_row({t, d, l1, l2, log_dist}, meta.basis, row);
    meta.scale_main.apply_row(row);
    double acc = random;
    for (int j = 0; j < design::kNumCovariates; ++j)
      if (pv.beta[j] >= 0) acc += row[j] * par[pv.beta[j]];
    return acc;
  }

  double eta_init(const Eigen::VectorXd& par, int t, int d, double lag,
                  double random) const {
    std::array<double, 3> row{};
    design::build_initial_row(t, lag, meta.basis, row);
    if (d == 1) {
      meta.scale_init1.apply_row(row);
      return random + row[1] * par[pv.b_d1_tr] + row[2] * par[pv.b_d1_lag];
    }
    meta.scale_init2.apply_row(row);
    return random + row[1] * par[pv.b_d2_tr] + row[2] * par[pv.b_d2_lag];
  }

  double sig0_for_day(const Eigen::VectorXd& par, int d) const {
    if (d == 1) return par[pv.sig0_d1];
    if (d == 2) return par[pv.sig0_d2];
    return par[pv.sig0];
  }
};

Eigen::MatrixXd coords_of(const std::vector<double>& x,
                          const std::vector<double>& y) {
  Eigen::MatrixXd out(static_cast<long>(x.size()), 2);
  for (size_t i = 0; i < x.size(); ++i) {
    out(static_cast<long>(i), 0) = x[i];
    out(static_cast<long>(i), 1) = y[i];
  }
  return out;
}

}  // namespace

void PredictionGrid::validate() const {
  const size_t m = cell_ids.size();
  if (m == 0) throw Error("prediction grid is empty");
  if (x_km.size() != m || y_km.size() != m || dist_coast_km.size() != m)
    throw Error("prediction grid: column sizes do not match");
  if (!block.empty() && block.size() != m)
    throw Error("prediction grid: block labels do not match the cells");
  for (double d : dist_coast_km)
    if (!(d > 0.0))
      throw Error("prediction grid: dist_coast must be positive");
  std::set<std::string> seen(cell_ids.begin(), cell_ids.end());
  if (seen.size() != m) throw Error("prediction grid: duplicate cell ids");
}

std::vector<int> PredictionGrid::block_cells(const std::string& label) const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (label.empty() || (!block.empty() && block[i] == label))
      out.push_back(i);
  return out;
}

Eigen::MatrixXd exp_covariance(const Eigen::MatrixXd& coords_a,
                               const Eigen::MatrixXd& coords_b, double sig0sq,
                               double phi) {
  if (sig0sq < 0.0 || phi < 0.0)
    throw Error("exp_covariance: parameters must be non-negative");
  if (coords_a.cols() != 2 || coords_b.cols() != 2)
    throw Error("exp_covariance: coordinates must have two columns");
  Eigen::MatrixXd out(coords_a.rows(), coords_b.rows());
  for (long i = 0; i < coords_a.rows(); ++i)
    for (long j = 0; j < coords_b.rows(); ++j) {
      const double d = std::hypot(coords_a(i, 0) - coords_b(j, 0),
                                  coords_a(i, 1) - coords_b(j, 1));
      out(i, j) = sig0sq * std::exp(-phi * d);
    }
  return out;
}

KrigeSystem build_krige_system(const Eigen::MatrixXd& obs_xy,
                               const Eigen::MatrixXd& target_xy, double phi) {
  const long n = obs_xy.rows(), m = target_xy.rows();
  if (n < 1 || m < 1) throw Error("build_krige_system: empty point set");
  KrigeSystem sys;
  const Eigen::MatrixXd r_ss = exp_covariance(obs_xy, obs_xy, 1.0, phi);
  const Eigen::MatrixXd r_st = exp_covariance(obs_xy, target_xy, 1.0, phi);
  const auto llt = samplers::chol_with_jitter(r_ss);
  sys.weights = llt.solve(r_st);
  Eigen::MatrixXd cond =
      exp_covariance(target_xy, target_xy, 1.0, phi) -
      r_st.transpose() * sys.weights;
  cond = 0.5 * (cond + cond.transpose()).eval();

  sys.exact_obs.assign(m, -1);
  for (long j = 0; j < m; ++j)
    for (long i = 0; i < n; ++i)
      if (obs_xy(i, 0) == target_xy(j, 0) &&
          obs_xy(i, 1) == target_xy(j, 1)) {
        sys.exact_obs[j] = static_cast<int>(i);
        // an exactly reproduced target carries no conditional noise and no
        // cross-covariance with the other targets
        cond.row(j).setZero();
        cond.col(j).setZero();
        break;
      }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cond);
  if (es.info() != Eigen::Success)
    throw Error("build_krige_system: eigendecomposition failed");
  sys.noise_root =
      es.eigenvectors() *
      es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  return sys;
}

Eigen::VectorXd krige_w(RngStream& rng, const KrigeSystem& sys,
                        const Eigen::VectorXd& w_obs, double mean,
                        double sig0sq) {
  if (w_obs.size() != sys.weights.rows())
    throw Error("krige_w: surface size does not match the system");
  if (!(sig0sq > 0.0)) throw Error("krige_w: variance must be positive");
  const long m = sys.noise_root.rows();
  Eigen::VectorXd z(m);
  for (long i = 0; i < m; ++i) z[i] = rng.normal();
  Eigen::VectorXd out =
      Eigen::VectorXd::Constant(m, mean) +
      sys.weights.transpose() *
          (w_obs - Eigen::VectorXd::Constant(w_obs.size(), mean)) +
      std::sqrt(sig0sq) * (sys.noise_root * z);
  for (long j = 0; j < m; ++j)
    if (sys.exact_obs[j] >= 0) out[j] = w_obs[sys.exact_obs[j]];
  return out;
}

PredictiveField simulate_predictive(const mcmc::PosteriorDraws& draws,
                                    const PredictionGrid& grid, int t_max,
                                    uint64_t seed, int threads) {
  grid.validate();
  const auto& meta = draws.meta;
  if (t_max < 1 || t_max > meta.T)
    throw Error("simulate_predictive: year range outside the fitted years");
  const Variant v = meta.variant;
  if (v >= Variant::kM2 && draws.surfaces.empty())
    throw Error("simulate_predictive: draws are missing the spatial surfaces");
  if (v >= Variant::kM4 && draws.day_means.empty())
    throw Error("simulate_predictive: draws are missing the daily means");

  PredictiveField field;
  field.n_draws = meta.chains * meta.draws_per_chain;
  field.T = t_max;
  field.n_days = meta.n_days;
  field.n_cells = grid.size();
  field.cell_ids = grid.cell_ids;
  field.block = grid.block;
  field.p.assign(static_cast<size_t>(field.n_draws) * t_max * meta.n_days *
                     grid.size(),
                 0.0);
  field.ind.assign(field.p.size(), 0);

  const int m = grid.size(), nd = meta.n_days;
  const ParamView pv = ParamView::build(draws);
  const Predictor pred{meta, pv};
  const Eigen::MatrixXd obs_xy = coords_of(meta.x_km, meta.y_km);
  const Eigen::MatrixXd target_xy = coords_of(grid.x_km, grid.y_km);
  std::vector<double> log_dist(m);
  for (int c = 0; c < m; ++c) log_dist[c] = std::log(grid.dist_coast_km[c]);
  const RngStream root(seed);

  detail::parallel_for(field.n_draws, threads, [&](int k) {
    RngStream rng = root.fork(static_cast<uint64_t>(k));
    const int chain = k / meta.draws_per_chain;
    const int draw = k % meta.draws_per_chain;

    // year 1: trivial records everywhere
    for (int d = 1; d <= nd; ++d)
      for (int c = 0; c < m; ++c) {
        const size_t at = field.idx(k, 1, d, c);
        field.p[at] = 1.0;
        field.ind[at] = 1;
      }
    if (t_max == 1) return;

    if (v == Variant::kM0) {
      for (int t = 2; t <= t_max; ++t) {
        const double p = records::crm_probability(t);
        for (int d = 1; d <= nd; ++d)
          for (int c = 0; c < m; ++c) {
            const size_t at = field.idx(k, t, d, c);
            field.p[at] = p;
            field.ind[at] = rng.uniform() < p ? 1 : 0;
          }
      }
      return;
    }

    const Eigen::VectorXd par = draws.params[chain].row(draw);
    KrigeSystem sys;
    Eigen::VectorXd v0 = Eigen::VectorXd::Zero(m);
    if (v >= Variant::kM2) {
      sys = build_krige_system(obs_xy, target_xy, par[pv.phi]);
      if (v != Variant::kM5)
        v0 = krige_w(rng, sys, draws.surfaces[chain][draw].row(0).transpose(),
                     0.0, par[pv.sig0]);
    }
    const Eigen::VectorXd* wm =
        v >= Variant::kM4 ? &draws.day_means[chain][draw] : nullptr;
    Eigen::VectorXd w0;

    std::vector<int8_t> prev(static_cast<size_t>(nd) * m, 1);
    std::vector<int8_t> cur(prev.size(), 0);
    for (int t = 2; t <= t_max; ++t) {
      for (int d = 1; d <= nd; ++d) {
        const int dc = (t - 2) * nd + (d - 1);
        if (v == Variant::kM5)
          w0 = krige_w(rng, sys,
                       draws.surfaces[chain][draw].row(dc).transpose(),
                       (*wm)[dc], pred.sig0_for_day(par, d));
        for (int c = 0; c < m; ++c) {
          double random = 0.0;
          switch (v) {
            case Variant::kM1:
              random = d == 1   ? par[pv.beta0_d1]
                       : d == 2 ? par[pv.beta0_d2]
                                : par[pv.beta0];
              break;
            case Variant::kM2:
              random = v0[c] + (d == 1   ? par[pv.beta0_d1]
                                : d == 2 ? par[pv.beta0_d2]
                                         : par[pv.beta0]);
              break;
            case Variant::kM3:
              random = v0[c] + (d == 1   ? par[pv.beta0_d1]
                                : d == 2 ? par[pv.beta0_d2]
                                         : par[pv.w_year0 + (t - 2)]);
              break;
            case Variant::kM4:
              random = v0[c] + (*wm)[dc];
              break;
            case Variant::kM5:
              random = w0[c];
              break;
            default:
              break;
          }
          double eta;
          if (d == 1)
            eta = pred.eta_init(par, t, 1, prev[(nd - 1) * m + c], random);
          else if (d == 2)
            eta = pred.eta_init(par, t, 2, cur[c], random);
          else
            eta = pred.eta_main(par, t, d, cur[(d - 2) * m + c],
                                cur[(d - 3) * m + c], log_dist[c], random);
          const double p = stats::inv_logit(eta);
          const size_t at = field.idx(k, t, d, c);
          field.p[at] = p;
          field.ind[at] = rng.uniform() < p ? 1 : 0;
          cur[(d - 1) * m + c] = field.ind[at];
        }
      }
      std::swap(prev, cur);
    }
  });
  return field;
}

OneStepField one_step_ahead(const mcmc::PosteriorDraws& draws,
                            const PredictionGrid& sites,
                            const records::RecordTensor& obs, uint64_t seed,
                            int threads) {
  sites.validate();
  const auto& meta = draws.meta;
  if (obs.n_sites != sites.size() || obs.n_years != meta.T ||
      obs.n_days != meta.n_days)
    throw Error("one_step_ahead: record tensor does not match sites/fit");
  const Variant v = meta.variant;
  if (v == Variant::kM0)
    throw Error("one_step_ahead: the memoryless variant has no lag model");
  if (v >= Variant::kM2 && draws.surfaces.empty())
    throw Error("one_step_ahead: draws are missing the spatial surfaces");

  OneStepField field;
  field.n_draws = meta.chains * meta.draws_per_chain;
  field.T = meta.T;
  field.n_days = meta.n_days;
  field.n_sites = sites.size();
  field.p.assign(static_cast<size_t>(field.n_draws) * (meta.T - 1) *
                     meta.n_days * sites.size(),
                 0.0);

  const int m = sites.size(), nd = meta.n_days, T = meta.T;
  const ParamView pv = ParamView::build(draws);
  const Predictor pred{meta, pv};
  const Eigen::MatrixXd obs_xy = coords_of(meta.x_km, meta.y_km);
  const Eigen::MatrixXd target_xy = coords_of(sites.x_km, sites.y_km);
  std::vector<double> log_dist(m);
  for (int c = 0; c < m; ++c) log_dist[c] = std::log(sites.dist_coast_km[c]);
  const RngStream root(seed);

  detail::parallel_for(field.n_draws, threads, [&](int k) {
    RngStream rng = root.fork(static_cast<uint64_t>(k));
    const int chain = k / meta.draws_per_chain;
    const int draw = k % meta.draws_per_chain;
    const Eigen::VectorXd par = draws.params[chain].row(draw);

    // one latent resolution of the tied indicators per draw
    std::vector<int8_t> work(static_cast<size_t>(m) * T * nd);
    for (int s = 0; s < m; ++s)
      for (int t = 1; t <= T; ++t)
        for (int d = 1; d <= nd; ++d) {
          const int code = obs.at(s, t, d);
          int8_t w = code >= 1 ? 1 : 0;
          if (code >= 2) w = rng.uniform() * code < 1.0 ? 1 : 0;
          work[(static_cast<size_t>(s) * T + (t - 1)) * nd + (d - 1)] = w;
        }
    const auto lag = [&](int s, int t, int d) -> double {
      return work[(static_cast<size_t>(s) * T + (t - 1)) * nd + (d - 1)];
    };

    KrigeSystem sys;
    Eigen::VectorXd v0 = Eigen::VectorXd::Zero(m);
    if (v >= Variant::kM2) {
      sys = build_krige_system(obs_xy, target_xy, par[pv.phi]);
      if (v != Variant::kM5)
        v0 = krige_w(rng, sys, draws.surfaces[chain][draw].row(0).transpose(),
                     0.0, par[pv.sig0]);
    }
    const Eigen::VectorXd* wm =
        v >= Variant::kM4 ? &draws.day_means[chain][draw] : nullptr;
    Eigen::VectorXd w0;

    for (int t = 2; t <= T; ++t)
      for (int d = 1; d <= nd; ++d) {
        const int dc = (t - 2) * nd + (d - 1);
        if (v == Variant::kM5)
          w0 = krige_w(rng, sys,
                       draws.surfaces[chain][draw].row(dc).transpose(),
                       (*wm)[dc], pred.sig0_for_day(par, d));
        for (int s = 0; s < m; ++s) {
          double random = 0.0;
          switch (v) {
            case Variant::kM1:
              random = d == 1   ? par[pv.beta0_d1]
                       : d == 2 ? par[pv.beta0_d2]
                                : par[pv.beta0];
              break;
            case Variant::kM2:
              random = v0[s] + (d == 1   ? par[pv.beta0_d1]
                                : d == 2 ? par[pv.beta0_d2]
                                         : par[pv.beta0]);
              break;
            case Variant::kM3:
              random = v0[s] + (d == 1   ? par[pv.beta0_d1]
                                : d == 2 ? par[pv.beta0_d2]
                                         : par[pv.w_year0 + (t - 2)]);
              break;
            case Variant::kM4:
              random = v0[s] + (*wm)[dc];
              break;
            case Variant::kM5:
              random = w0[s];
              break;
            default:
              break;
          }
          double eta;
          if (d == 1)
            eta = pred.eta_init(par, t, 1, lag(s, t - 1, nd), random);
          else if (d == 2)
            eta = pred.eta_init(par, t, 2, lag(s, t, 1), random);
          else
            eta = pred.eta_main(par, t, d, lag(s, t, d - 1), lag(s, t, d - 2),
                                log_dist[s], random);
          field.p[field.idx(k, t, d, s)] = stats::inv_logit(eta);
        }
      }
  });
  return field;
}

namespace {

void check_window(const PredictiveField& f, int t1, int t2, int l1, int l2) {
  if (t1 < 1 || t1 > t2 || t2 > f.T)
    throw Error("summary: year range outside the field");
  if (l1 < 1 || l1 > l2 || l2 > f.n_days)
    throw Error("summary: day range outside the field");
}

}  // namespace

std::vector<double> nbar(const PredictiveField& field, int t1, int t2, int l1,
                         int l2, int cell) {
  check_window(field, t1, t2, l1, l2);
  if (cell < 0 || cell >= field.n_cells)
    throw Error("nbar: cell index out of range");
  std::vector<double> out(field.n_draws, 0.0);
  const double days = l2 - l1 + 1;
  for (int k = 0; k < field.n_draws; ++k) {
    long count = 0;
    for (int t = t1; t <= t2; ++t)
      for (int l = l1; l <= l2; ++l) count += field.indicator(k, t, l, cell);
    out[k] = static_cast<double>(count) / days;
  }
  return out;
}

std::vector<double> ratio(const PredictiveField& field, int t1, int t2, int l1,
                          int l2, int cell) {
  std::vector<double> out = nbar(field, t1, t2, l1, l2, cell);
  const double e0 = records::expected_stationary_records(t1, t2);
  for (double& v : out) v /= e0;
  return out;
}

Eigen::MatrixXd nbar_by_cell(const PredictiveField& field, int t1, int t2,
                             int l1, int l2) {
  check_window(field, t1, t2, l1, l2);
  Eigen::MatrixXd out(field.n_draws, field.n_cells);
  const double days = l2 - l1 + 1;
  for (int k = 0; k < field.n_draws; ++k)
    for (int c = 0; c < field.n_cells; ++c) {
      long count = 0;
      for (int t = t1; t <= t2; ++t)
        for (int l = l1; l <= l2; ++l) count += field.indicator(k, t, l, c);
      out(k, c) = static_cast<double>(count) / days;
    }
  return out;
}

std::vector<double> ers(const PredictiveField& field, int t, int l,
                        const std::vector<int>& cells) {
  check_window(field, t, t, l, l);
  if (cells.empty()) throw Error("ers: empty block");
  std::vector<double> out(field.n_draws, 0.0);
  for (int k = 0; k < field.n_draws; ++k) {
    long count = 0;
    for (int c : cells) {
      if (c < 0 || c >= field.n_cells) throw Error("ers: bad cell index");
      count += field.indicator(k, t, l, c);
    }
    out[k] = static_cast<double>(count) / static_cast<double>(cells.size());
  }
  return out;
}

std::vector<double> ers_bar(const PredictiveField& field, int t,
                            const std::vector<int>& days,
                            const std::vector<int>& cells) {
  if (days.empty()) throw Error("ers_bar: empty day set");
  std::vector<double> out(field.n_draws, 0.0);
  for (int l : days) {
    const auto one = ers(field, t, l, cells);
    for (int k = 0; k < field.n_draws; ++k) out[k] += one[k];
  }
  for (double& v : out) v /= static_cast<double>(days.size());
  return out;
}

std::vector<double> area_fraction_exceeding(const Eigen::MatrixXd& stat,
                                            double threshold,
                                            ExceedMode mode) {
  const long n_draws = stat.rows(), n_cells = stat.cols();
  if (n_draws < 1 || n_cells < 1)
    throw Error("area_fraction_exceeding: empty statistic matrix");
  if (mode == ExceedMode::kPerDraw) {
    std::vector<double> out(n_draws, 0.0);
    for (long k = 0; k < n_draws; ++k) {
      long c = 0;
      for (long j = 0; j < n_cells; ++j) c += stat(k, j) > threshold;
      out[k] = static_cast<double>(c) / static_cast<double>(n_cells);
    }
    return out;
  }
  long c = 0;
  for (long j = 0; j < n_cells; ++j) {
    double v;
    if (mode == ExceedMode::kMean) {
      v = stat.col(j).mean();
    } else {
      std::vector<double> col(stat.col(j).data(),
                              stat.col(j).data() + n_draws);
      v = stats::quantile(std::move(col), 0.05);
    }
    c += v > threshold;
  }
  return {static_cast<double>(c) / static_cast<double>(n_cells)};
}

}  // namespace recbayes::krige
