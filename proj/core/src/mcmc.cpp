#include "recbayes/mcmc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <utility>

#include "recbayes/detail/parallel.hpp"
#include "recbayes/stats.hpp"

namespace recbayes::mcmc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kStreamsPerSweep = 16;
// fixed chunk count for order-deterministic parallel reductions; results do
// not depend on the thread budget
constexpr int kChunks = 64;

using RowMajorXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::pair<int, int> chunk_range(int n, int c) {
  const int per = (n + kChunks - 1) / kChunks;
  const int lo = c * per;
  return {std::min(n, lo), std::min(n, lo + per)};
}

int day_class(int d) { return d == 1 ? 1 : d == 2 ? 2 : 0; }

// raw design columns that depend on the lagged indicators
constexpr std::array<int, 9> kLagCols = {3, 4, 5, 6, 7, 8, 18, 19, 20};

}  // namespace

Variant variant_from_string(const std::string& s) {
  if (s == "M0" || s == "m0") return Variant::kM0;
  if (s == "M1" || s == "m1") return Variant::kM1;
  if (s == "M2" || s == "m2") return Variant::kM2;
  if (s == "M3" || s == "m3") return Variant::kM3;
  if (s == "M4" || s == "m4") return Variant::kM4;
  if (s == "M5" || s == "m5") return Variant::kM5;
  throw Error("unknown model variant '" + s + "'");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kM0: return "M0";
    case Variant::kM1: return "M1";
    case Variant::kM2: return "M2";
    case Variant::kM3: return "M3";
    case Variant::kM4: return "M4";
    case Variant::kM5: return "M5";
  }
  throw Error("unknown model variant");
}

FitData build_fit_data(const records::TemperaturePanel& panel,
                       const records::RecordTensor& obs) {
  panel.validate();
  if (panel.n_years < 4)
    throw Error("build_fit_data: need at least 4 years for the trend basis");
  if (panel.n_days < 3)
    throw Error("build_fit_data: need at least 3 days per year");
  if (obs.n_sites != panel.n_sites() || obs.n_years != panel.n_years ||
      obs.n_days != panel.n_days)
    throw Error("build_fit_data: record tensor does not match the panel");

  FitData fd;
  fd.n_sites = panel.n_sites();
  fd.T = panel.n_years;
  fd.n_days = panel.n_days;
  fd.site_ids = panel.site_ids;
  fd.x_km = panel.x_km;
  fd.y_km = panel.y_km;
  fd.dist_coast = panel.dist_coast_km;
  fd.first_year = panel.first_year;
  fd.obs = obs;

  const int n = fd.n_sites, T = fd.T, nd = fd.n_days;
  fd.dist = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> pairwise;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double d = std::hypot(panel.x_km[i] - panel.x_km[j],
                                  panel.y_km[i] - panel.y_km[j]);
      fd.dist(i, j) = fd.dist(j, i) = d;
      pairwise.push_back(d);
    }
  fd.median_dist = pairwise.empty() ? 1.0 : stats::quantile(pairwise, 0.5);
  fd.log_dist.resize(n);
  for (int i = 0; i < n; ++i) fd.log_dist[i] = std::log(panel.dist_coast_km[i]);

  std::vector<double> support;
  for (int t = 2; t <= T; ++t) support.push_back(std::log(t - 1.0));
  fd.basis = design::build_ortho_poly(support, 2);

  // column scaling fitted with tied indicators treated as zero
  const auto ind = [&obs](int s, int t, int d) {
    return records::indicator_value(obs.at(s, t, d),
                                    records::TieRule::kExclude);
  };
  Eigen::MatrixXd xm(static_cast<long>(T - 1) * (nd - 2) * n,
                     design::kNumCovariates);
  std::array<double, design::kNumCovariates> buf{};
  long r = 0;
  for (int t = 2; t <= T; ++t)
    for (int d = 3; d <= nd; ++d)
      for (int s = 0; s < n; ++s, ++r) {
        design::RowInputs in{t, d, ind(s, t, d - 1), ind(s, t, d - 2),
                             fd.log_dist[s]};
        design::build_design_row(in, fd.basis, buf);
        for (int j = 0; j < design::kNumCovariates; ++j) xm(r, j) = buf[j];
      }
  fd.scale_main = design::fit_scaling(xm, true);

  Eigen::MatrixXd x1(static_cast<long>(T - 1) * n, 3), x2(x1.rows(), 3);
  std::array<double, 3> buf3{};
  r = 0;
  for (int t = 2; t <= T; ++t)
    for (int s = 0; s < n; ++s, ++r) {
      design::build_initial_row(t, ind(s, t - 1, nd), fd.basis, buf3);
      for (int j = 0; j < 3; ++j) x1(r, j) = buf3[j];
      design::build_initial_row(t, ind(s, t, 1), fd.basis, buf3);
      for (int j = 0; j < 3; ++j) x2(r, j) = buf3[j];
    }
  fd.scale_init1 = design::fit_scaling(x1, true);
  fd.scale_init2 = design::fit_scaling(x2, true);
  return fd;
}

int PosteriorDraws::param_index(const std::string& name) const {
  for (size_t i = 0; i < param_names.size(); ++i)
    if (param_names[i] == name) return static_cast<int>(i);
  throw Error("unknown parameter '" + name + "'");
}

struct GibbsEngine::Impl {
  const ModelSpec& spec;
  const FitData& data;
  ChainState& st;
  int chain_index;
  int n, T, nd, n_day_cells, co, k_main, threads;
  size_t n_cells;
  RngStream root;

  RowMajorXd x_main;           // modeled cells x k_main; day-1/2 rows zero
  Eigen::MatrixXd x_d1, x_d2;  // (T-1)*n x 2 for the initial submodels
  Eigen::VectorXd xb;          // fixed-effect part per modeled cell

  struct Tie {
    int s, t, d, r;
  };
  std::vector<Tie> ties;

  // correlation caches at the current decay
  Eigen::LLT<Eigen::MatrixXd> r_llt;
  Eigen::MatrixXd r_inv;
  Eigen::VectorXd r_inv_1;
  double q11 = 0.0, r_logdet = 0.0;

  long lam_acc = 0, lam_tot = 0;

  Impl(const ModelSpec& sp, const FitData& fd, ChainState& state, int chain)
      : spec(sp),
        data(fd),
        st(state),
        chain_index(chain),
        root(RngStream(sp.seed).fork(static_cast<uint64_t>(chain) + 1)) {
    if (spec.variant == Variant::kM0)
      throw Error("GibbsEngine: the memoryless variant has a closed form");
    if (spec.intercept_in_beta && spec.variant != Variant::kM1)
      throw Error("GibbsEngine: uncentered intercept is only supported in M1");
    n = data.n_sites;
    T = data.T;
    nd = data.n_days;
    n_day_cells = data.n_day_cells();
    n_cells = static_cast<size_t>(n_day_cells) * n;
    co = spec.intercept_in_beta ? 0 : 1;
    k_main = design::kNumCovariates - co;
    threads = std::max(1, spec.threads);

    init_state();
    build_design();
    if (uses_space()) refresh_r_cache();
    update_xb();
  }

  bool uses_space() const { return spec.variant >= Variant::kM2; }

  size_t widx(int s, int t, int d) const {
    return (static_cast<size_t>(s) * T + (t - 1)) * nd + (d - 1);
  }
  int8_t work(int s, int t, int d) const { return st.work_ind[widx(s, t, d)]; }

  void init_state() {
    st.beta = Eigen::VectorXd::Zero(k_main);
    st.beta_d1.setZero();
    st.beta_d2.setZero();
    // deterministic chain-dependent offsets give overdispersed starts
    const double off = -2.0 * chain_index;
    st.beta0_d1 = st.beta0_d2 = off;
    if (spec.intercept_in_beta)
      st.beta(0) = off;
    else
      st.beta0 = off;
    st.lam.assign(n_cells, 1.0);
    st.work_ind.assign(static_cast<size_t>(n) * T * nd, 0);
    for (int s = 0; s < n; ++s)
      for (int t = 1; t <= T; ++t)
        for (int d = 1; d <= nd; ++d)
          st.work_ind[widx(s, t, d)] = data.obs.at(s, t, d) >= 1 ? 1 : 0;
    st.y.assign(n_cells, 0.0);
    for (int t = 2; t <= T; ++t)
      for (int d = 1; d <= nd; ++d)
        for (int s = 0; s < n; ++s)
          st.y[data.cell(s, t, d)] = work(s, t, d) ? 0.5 : -0.5;
    st.sig0sq = st.sig1sq = 1.0;
    st.sig0sq_d1 = st.sig1sq_d1 = st.sig0sq_d2 = st.sig1sq_d2 = 1.0;
    const double base =
        spec.phi_init > 0 ? spec.phi_init : 3.0 / data.median_dist;
    st.phi = base * std::pow(2.0, chain_index);
    st.phi_adapt = samplers::AdaptiveRWState(spec.phi_proposal_log_sd);

    switch (spec.variant) {
      case Variant::kM5:
        st.w_daily = Eigen::MatrixXd::Zero(n_day_cells, n);
        st.wm.assign(n_day_cells, 0.0);
        break;
      case Variant::kM4:
        st.v_static = Eigen::VectorXd::Zero(n);
        st.wm.assign(n_day_cells, 0.0);
        break;
      case Variant::kM3:
        st.v_static = Eigen::VectorXd::Zero(n);
        st.w_annual.assign(T - 1, 0.0);
        break;
      case Variant::kM2:
        st.v_static = Eigen::VectorXd::Zero(n);
        break;
      default:
        break;
    }

    for (int t = 2; t <= T; ++t)
      for (int d = 1; d <= nd; ++d)
        for (int s = 0; s < n; ++s) {
          const int code = data.obs.at(s, t, d);
          if (code >= 2) ties.push_back({s, t, d, code});
        }
  }

  void build_design() {
    x_main = RowMajorXd::Zero(static_cast<long>(n_cells), k_main);
    std::array<double, design::kNumCovariates> buf{};
    for (int t = 2; t <= T; ++t)
      for (int d = 3; d <= nd; ++d)
        for (int s = 0; s < n; ++s) {
          design::RowInputs in{t, d, static_cast<double>(work(s, t, d - 1)),
                               static_cast<double>(work(s, t, d - 2)),
                               data.log_dist[s]};
          design::build_design_row(in, data.basis, buf);
          data.scale_main.apply_row(buf);
          const long row = static_cast<long>(data.cell(s, t, d));
          for (int j = co; j < design::kNumCovariates; ++j)
            x_main(row, j - co) = buf[j];
        }
    x_d1 = Eigen::MatrixXd::Zero(static_cast<long>(T - 1) * n, 2);
    x_d2 = x_d1;
    std::array<double, 3> buf3{};
    for (int t = 2; t <= T; ++t)
      for (int s = 0; s < n; ++s) {
        const long i = static_cast<long>(t - 2) * n + s;
        design::build_initial_row(t, work(s, t - 1, nd), data.basis, buf3);
        data.scale_init1.apply_row(buf3);
        x_d1(i, 0) = buf3[1];
        x_d1(i, 1) = buf3[2];
        design::build_initial_row(t, work(s, t, 1), data.basis, buf3);
        data.scale_init2.apply_row(buf3);
        x_d2(i, 0) = buf3[1];
        x_d2(i, 1) = buf3[2];
      }
    xb = Eigen::VectorXd::Zero(static_cast<long>(n_cells));
  }

  // rewrite only the lag-dependent scaled design entries from work_ind
  void refresh_design() {
    const auto& sm = data.scale_main;
    const auto& s1 = data.scale_init1;
    const auto& s2 = data.scale_init2;
    detail::parallel_for(n_day_cells, threads, [&](int dc) {
      const int t = 2 + dc / nd, d = 1 + dc % nd;
      if (d >= 3) {
        const double lt = std::log(t - 1.0);
        for (int s = 0; s < n; ++s) {
          const double l1 = work(s, t, d - 1), l2 = work(s, t, d - 2);
          const double ld = data.log_dist[s], l12 = l1 * l2;
          const std::array<double, 9> raw = {l1,      l2,      l12,
                                             lt * l1, lt * l2, lt * l12,
                                             ld * l1, ld * l2, ld * l12};
          const long row = static_cast<long>(dc) * n + s;
          for (int k = 0; k < 9; ++k) {
            const int j = kLagCols[k];
            x_main(row, j - co) = (raw[k] - sm.mean[j]) / sm.sd[j];
          }
        }
      } else if (d == 1) {
        for (int s = 0; s < n; ++s)
          x_d1(static_cast<long>(t - 2) * n + s, 1) =
              (work(s, t - 1, nd) - s1.mean[2]) / s1.sd[2];
      } else {
        for (int s = 0; s < n; ++s)
          x_d2(static_cast<long>(t - 2) * n + s, 1) =
              (work(s, t, 1) - s2.mean[2]) / s2.sd[2];
      }
    });
  }

  void update_xb() {
    xb.noalias() = x_main * st.beta;
    for (int t = 2; t <= T; ++t)
      for (int s = 0; s < n; ++s) {
        const long i = static_cast<long>(t - 2) * n + s;
        xb[static_cast<long>(data.cell(s, t, 1))] = x_d1.row(i).dot(st.beta_d1);
        xb[static_cast<long>(data.cell(s, t, 2))] = x_d2.row(i).dot(st.beta_d2);
      }
  }

  void refresh_r_cache() {
    Eigen::MatrixXd corr = (-st.phi * data.dist.array()).exp();
    r_llt = samplers::chol_with_jitter(corr);
    r_logdet = 2.0 * r_llt.matrixLLT().diagonal().array().log().sum();
    r_inv = r_llt.solve(Eigen::MatrixXd::Identity(n, n));
    r_inv_1 = r_llt.solve(Eigen::VectorXd::Ones(n));
    q11 = r_inv_1.sum();
  }

  double sig0_class(int cls) const {
    return cls == 1 ? st.sig0sq_d1 : cls == 2 ? st.sig0sq_d2 : st.sig0sq;
  }
  double sig1_class(int cls) const {
    return cls == 1 ? st.sig1sq_d1 : cls == 2 ? st.sig1sq_d2 : st.sig1sq;
  }
  double beta0_class(int cls) const {
    return cls == 1 ? st.beta0_d1 : cls == 2 ? st.beta0_d2 : st.beta0;
  }

  // quadratic forms (w - m 1)' R^-1 (w - m 1) of the daily surfaces around
  // their means, accumulated per day class in fixed chunk order
  std::array<double, 3> surface_quadforms(
      const Eigen::LLT<Eigen::MatrixXd>& llt) const {
    std::vector<std::array<double, 3>> part(kChunks, {0.0, 0.0, 0.0});
    detail::parallel_for(kChunks, threads, [&](int c) {
      const auto [lo, hi] = chunk_range(n_day_cells, c);
      Eigen::VectorXd u(n);
      for (int dc = lo; dc < hi; ++dc) {
        const int cls = day_class(1 + dc % nd);
        u = st.w_daily.row(dc).transpose() -
            Eigen::VectorXd::Constant(n, st.wm[dc]);
        part[c][cls] += llt.matrixL().solve(u).squaredNorm();
      }
    });
    std::array<double, 3> out = {0.0, 0.0, 0.0};
    for (const auto& p : part)
      for (int k = 0; k < 3; ++k) out[k] += p[k];
    return out;
  }
};

GibbsEngine::GibbsEngine(const ModelSpec& spec, const FitData& data,
                         int chain_index)
    : spec_(spec),
      data_(data),
      impl_(std::make_unique<Impl>(spec_, data_, st_, chain_index)) {}

GibbsEngine::~GibbsEngine() = default;

double GibbsEngine::random_part(int s, int t, int d) const {
  switch (spec_.variant) {
    case Variant::kM1:
      if (d == 1) return st_.beta0_d1;
      if (d == 2) return st_.beta0_d2;
      return spec_.intercept_in_beta ? 0.0 : st_.beta0;
    case Variant::kM2:
      return st_.v_static[s] + (d == 1   ? st_.beta0_d1
                                : d == 2 ? st_.beta0_d2
                                         : st_.beta0);
    case Variant::kM3:
      return st_.v_static[s] + (d == 1   ? st_.beta0_d1
                                : d == 2 ? st_.beta0_d2
                                         : st_.w_annual[t - 2]);
    case Variant::kM4:
      return st_.v_static[s] + st_.wm[data_.day_cell(t, d)];
    case Variant::kM5:
      return st_.w_daily(data_.day_cell(t, d), s);
    default:
      throw Error("random_part: no sampler state for this variant");
  }
}

double GibbsEngine::eta(int s, int t, int d) const {
  return impl_->xb[static_cast<long>(data_.cell(s, t, d))] +
         random_part(s, t, d);
}

void GibbsEngine::refresh_cache() {
  impl_->refresh_design();
  impl_->update_xb();
}

void GibbsEngine::step_ties(RngStream& rng) {
  for (const auto& tie : impl_->ties)
    st_.work_ind[impl_->widx(tie.s, tie.t, tie.d)] =
        rng.uniform() * tie.r < 1.0 ? 1 : 0;
  refresh_cache();
}

void GibbsEngine::step_latent(RngStream& rng) {
  auto& I = *impl_;
  detail::parallel_for(I.n_day_cells, I.threads, [&](int dc) {
    RngStream r = rng.fork(static_cast<uint64_t>(dc));
    const int t = 2 + dc / I.nd, d = 1 + dc % I.nd;
    for (int s = 0; s < I.n; ++s) {
      const size_t c = static_cast<size_t>(dc) * I.n + s;
      const double mu = I.xb[static_cast<long>(c)] + random_part(s, t, d);
      const double sd = std::sqrt(st_.lam[c]);
      st_.y[c] = I.work(s, t, d)
                     ? samplers::sample_truncated_normal(r, mu, sd, 0.0, kInf)
                     : samplers::sample_truncated_normal(r, mu, sd, -kInf, 0.0);
    }
  });
}

void GibbsEngine::step_lambda(RngStream& rng) {
  auto& I = *impl_;
  std::vector<int> acc(I.n_day_cells, 0);
  detail::parallel_for(I.n_day_cells, I.threads, [&](int dc) {
    RngStream r = rng.fork(static_cast<uint64_t>(dc));
    const int t = 2 + dc / I.nd, d = 1 + dc % I.nd;
    int a = 0;
    for (int s = 0; s < I.n; ++s) {
      const size_t c = static_cast<size_t>(dc) * I.n + s;
      const double e =
          st_.y[c] - (I.xb[static_cast<long>(c)] + random_part(s, t, d));
      const double k = samplers::sample_ks(r);
      const double prop = 4.0 * k * k;  // lambda = (2K)^2, K ~ KS
      const double cur = st_.lam[c];
      // independence proposal from the prior, so the ratio is the
      // normal-likelihood ratio alone
      const double logr = 0.5 * (std::log(cur) - std::log(prop)) -
                          0.5 * e * e * (1.0 / prop - 1.0 / cur);
      if (std::log(r.uniform()) < logr) {
        st_.lam[c] = prop;
        ++a;
      }
    }
    acc[dc] = a;
  });
  for (int v : acc) I.lam_acc += v;
  I.lam_tot += static_cast<long>(I.n_cells);
}

void GibbsEngine::step_beta(RngStream& rng) {
  auto& I = *impl_;
  const double prior_prec =
      1.0 / (spec_.priors.beta_sd * spec_.priors.beta_sd);
  const int k = I.k_main;

  std::vector<Eigen::MatrixXd> aa(kChunks, Eigen::MatrixXd::Zero(k, k));
  std::vector<Eigen::VectorXd> bb(kChunks, Eigen::VectorXd::Zero(k));
  detail::parallel_for(kChunks, I.threads, [&](int c) {
    const auto [lo, hi] = chunk_range(I.n_day_cells, c);
    long rows = 0;
    for (int dc = lo; dc < hi; ++dc)
      if (1 + dc % I.nd >= 3) rows += I.n;
    if (rows == 0) return;
    Eigen::MatrixXd xw(rows, k);
    Eigen::VectorXd rw(rows);
    long r2 = 0;
    for (int dc = lo; dc < hi; ++dc) {
      const int t = 2 + dc / I.nd, d = 1 + dc % I.nd;
      if (d < 3) continue;
      for (int s = 0; s < I.n; ++s, ++r2) {
        const long row = static_cast<long>(dc) * I.n + s;
        const double sw = 1.0 / std::sqrt(st_.lam[row]);
        xw.row(r2) = I.x_main.row(row) * sw;
        rw[r2] = sw * (st_.y[row] - random_part(s, t, d));
      }
    }
    aa[c].noalias() = xw.transpose() * xw;
    bb[c].noalias() = xw.transpose() * rw;
  });
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k);
  for (int c = 0; c < kChunks; ++c) {
    a += aa[c];
    b += bb[c];
  }
  a.diagonal().array() += prior_prec;
  {
    RngStream r = rng.fork(0);
    st_.beta = samplers::sample_mvn_from_precision(r, a, b);
  }

  // the two initial-day submodels
  for (int d = 1; d <= 2; ++d) {
    const Eigen::MatrixXd& x = d == 1 ? I.x_d1 : I.x_d2;
    Eigen::Matrix2d a2 = Eigen::Matrix2d::Zero();
    Eigen::Vector2d b2 = Eigen::Vector2d::Zero();
    for (int t = 2; t <= I.T; ++t)
      for (int s = 0; s < I.n; ++s) {
        const long i = static_cast<long>(t - 2) * I.n + s;
        const size_t c = I.data.cell(s, t, d);
        const double w = 1.0 / st_.lam[c];
        const Eigen::Vector2d xr = x.row(i).transpose();
        a2.noalias() += w * xr * xr.transpose();
        b2.noalias() += xr * (w * (st_.y[c] - random_part(s, t, d)));
      }
    a2.diagonal().array() += prior_prec;
    RngStream r = rng.fork(static_cast<uint64_t>(d));
    const Eigen::VectorXd draw = samplers::sample_mvn_from_precision(r, a2, b2);
    if (d == 1)
      st_.beta_d1 = draw;
    else
      st_.beta_d2 = draw;
  }
  I.update_xb();
}

void GibbsEngine::step_surfaces(RngStream& rng) {
  auto& I = *impl_;
  if (spec_.variant < Variant::kM2) return;
  if (spec_.variant == Variant::kM5) {
    detail::parallel_for(I.n_day_cells, I.threads, [&](int dc) {
      RngStream r = rng.fork(static_cast<uint64_t>(dc));
      const int cls = day_class(1 + dc % I.nd);
      const double s0 = I.sig0_class(cls);
      Eigen::MatrixXd a = I.r_inv / s0;
      Eigen::VectorXd rhs = I.r_inv_1 * (st_.wm[dc] / s0);
      for (int s = 0; s < I.n; ++s) {
        const size_t c = static_cast<size_t>(dc) * I.n + s;
        const double w = 1.0 / st_.lam[c];
        a(s, s) += w;
        rhs[s] += w * (st_.y[c] - I.xb[static_cast<long>(c)]);
      }
      st_.w_daily.row(dc) =
          samplers::sample_mvn_from_precision(r, a, rhs).transpose();
    });
    return;
  }
  // single static surface shared by every day
  Eigen::VectorXd dsum = Eigen::VectorXd::Zero(I.n);
  Eigen::VectorXd bsum = Eigen::VectorXd::Zero(I.n);
  detail::parallel_for(I.n, I.threads, [&](int s) {
    double ds = 0.0, bs = 0.0;
    for (int dc = 0; dc < I.n_day_cells; ++dc) {
      const int t = 2 + dc / I.nd, d = 1 + dc % I.nd;
      const size_t c = static_cast<size_t>(dc) * I.n + s;
      const double w = 1.0 / st_.lam[c];
      const double other = random_part(s, t, d) - st_.v_static[s];
      ds += w;
      bs += w * (st_.y[c] - I.xb[static_cast<long>(c)] - other);
    }
    dsum[s] = ds;
    bsum[s] = bs;
  });
  Eigen::MatrixXd a = I.r_inv / st_.sig0sq;
  a.diagonal() += dsum;
  RngStream r = rng.fork(0);
  st_.v_static = samplers::sample_mvn_from_precision(r, a, bsum);
}

void GibbsEngine::step_means(RngStream& rng) {
  auto& I = *impl_;
  const double prior_prec =
      1.0 / (spec_.priors.beta_sd * spec_.priors.beta_sd);

  // class intercept as a fixed effect, from the latent residuals
  const auto fixed_intercept = [&](int cls, uint64_t tag) {
    double prec = prior_prec, rhs = 0.0;
    for (int dc = 0; dc < I.n_day_cells; ++dc) {
      const int t = 2 + dc / I.nd, d = 1 + dc % I.nd;
      if (day_class(d) != cls) continue;
      for (int s = 0; s < I.n; ++s) {
        const size_t c = static_cast<size_t>(dc) * I.n + s;
        const double w = 1.0 / st_.lam[c];
        const double other = random_part(s, t, d) - I.beta0_class(cls);
        prec += w;
        rhs += w * (st_.y[c] - I.xb[static_cast<long>(c)] - other);
      }
    }
    RngStream r = rng.fork(tag);
    return rhs / prec + r.normal() / std::sqrt(prec);
  };
  // class intercept as the hyper-mean of the daily means
  const auto hyper_intercept = [&](int cls, uint64_t tag) {
    const double s1 = I.sig1_class(cls);
    double sum = 0.0;
    int count = 0;
    for (int dc = 0; dc < I.n_day_cells; ++dc)
      if (day_class(1 + dc % I.nd) == cls) {
        sum += st_.wm[dc];
        ++count;
      }
    const double prec = count / s1 + prior_prec;
    RngStream r = rng.fork(tag);
    return (sum / s1) / prec + r.normal() / std::sqrt(prec);
  };

  switch (spec_.variant) {
    case Variant::kM1:
    case Variant::kM2:
      if (!spec_.intercept_in_beta) st_.beta0 = fixed_intercept(0, 0);
      st_.beta0_d1 = fixed_intercept(1, 1);
      st_.beta0_d2 = fixed_intercept(2, 2);
      return;
    case Variant::kM3: {
      detail::parallel_for(I.T - 1, I.threads, [&](int i) {
        const int t = 2 + i;
        double prec = 1.0 / st_.sig1sq, rhs = st_.beta0 / st_.sig1sq;
        for (int d = 3; d <= I.nd; ++d)
          for (int s = 0; s < I.n; ++s) {
            const size_t c = I.data.cell(s, t, d);
            const double w = 1.0 / st_.lam[c];
            prec += w;
            rhs += w * (st_.y[c] - I.xb[static_cast<long>(c)] -
                        st_.v_static[s]);
          }
        RngStream r = rng.fork(static_cast<uint64_t>(i));
        st_.w_annual[i] = rhs / prec + r.normal() / std::sqrt(prec);
      });
      const double prec = (I.T - 1) / st_.sig1sq + prior_prec;
      const double rhs =
          stats::comp_sum(st_.w_annual) / st_.sig1sq;
      RngStream r = rng.fork(static_cast<uint64_t>(I.T - 1));
      st_.beta0 = rhs / prec + r.normal() / std::sqrt(prec);
      st_.beta0_d1 = fixed_intercept(1, static_cast<uint64_t>(I.T));
      st_.beta0_d2 = fixed_intercept(2, static_cast<uint64_t>(I.T) + 1);
      return;
    }
    case Variant::kM4: {
      detail::parallel_for(I.n_day_cells, I.threads, [&](int dc) {
        const int cls = day_class(1 + dc % I.nd);
        const double s1 = I.sig1_class(cls);
        double prec = 1.0 / s1, rhs = I.beta0_class(cls) / s1;
        for (int s = 0; s < I.n; ++s) {
          const size_t c = static_cast<size_t>(dc) * I.n + s;
          const double w = 1.0 / st_.lam[c];
          prec += w;
          rhs +=
              w * (st_.y[c] - I.xb[static_cast<long>(c)] - st_.v_static[s]);
        }
        RngStream r = rng.fork(static_cast<uint64_t>(dc));
        st_.wm[dc] = rhs / prec + r.normal() / std::sqrt(prec);
      });
      break;
    }
    case Variant::kM5: {
      detail::parallel_for(I.n_day_cells, I.threads, [&](int dc) {
        const int cls = day_class(1 + dc % I.nd);
        const double s0 = I.sig0_class(cls), s1 = I.sig1_class(cls);
        const double prec = I.q11 / s0 + 1.0 / s1;
        const double rhs =
            I.r_inv_1.dot(st_.w_daily.row(dc).transpose()) / s0 +
            I.beta0_class(cls) / s1;
        RngStream r = rng.fork(static_cast<uint64_t>(dc));
        st_.wm[dc] = rhs / prec + r.normal() / std::sqrt(prec);
      });
      break;
    }
    default:
      return;
  }
  // M4/M5: global intercepts are the hyper-means of the daily means
  st_.beta0 = hyper_intercept(0, static_cast<uint64_t>(I.n_day_cells));
  st_.beta0_d1 = hyper_intercept(1, static_cast<uint64_t>(I.n_day_cells) + 1);
  st_.beta0_d2 = hyper_intercept(2, static_cast<uint64_t>(I.n_day_cells) + 2);
}

void GibbsEngine::step_phi(RngStream& rng) {
  auto& I = *impl_;
  if (spec_.variant < Variant::kM2) return;
  const double ap = spec_.priors.a_phi, bp = spec_.priors.b_phi;

  const auto log_target = [&](double phi) -> double {
    Eigen::MatrixXd corr = (-phi * I.data.dist.array()).exp();
    const auto llt = samplers::chol_with_jitter(corr);
    const double logdet =
        2.0 * llt.matrixLLT().diagonal().array().log().sum();
    const double prior = (ap - 1.0) * std::log(phi) - bp * phi;
    if (spec_.variant == Variant::kM5) {
      std::vector<double> part(kChunks, 0.0);
      detail::parallel_for(kChunks, I.threads, [&](int c) {
        const auto [lo, hi] = chunk_range(I.n_day_cells, c);
        Eigen::VectorXd u(I.n);
        double acc = 0.0;
        for (int dc = lo; dc < hi; ++dc) {
          const int cls = day_class(1 + dc % I.nd);
          u = st_.w_daily.row(dc).transpose() -
              Eigen::VectorXd::Constant(I.n, st_.wm[dc]);
          acc += llt.matrixL().solve(u).squaredNorm() / I.sig0_class(cls);
        }
        part[c] = acc;
      });
      const double qf = stats::comp_sum(part);
      return prior - 0.5 * I.n_day_cells * logdet - 0.5 * qf;
    }
    const double qf = llt.matrixL().solve(st_.v_static).squaredNorm();
    return prior - 0.5 * logdet - 0.5 * qf / st_.sig0sq;
  };

  double cache = log_target(st_.phi);
  const bool accepted =
      samplers::adaptive_rw_step(rng, st_.phi_adapt, st_.phi, cache,
                                 log_target);
  if (accepted) I.refresh_r_cache();
}

void GibbsEngine::step_variances(RngStream& rng) {
  auto& I = *impl_;
  if (spec_.variant < Variant::kM2) return;
  const double a = spec_.priors.a_sigma, b = spec_.priors.b_sigma;
  const int m_main = (I.T - 1) * (I.nd - 2);

  const auto draw_ig = [&](double shape, double scale, uint64_t tag) {
    RngStream r = rng.fork(tag);
    return samplers::sample_inverse_gamma(r, shape, scale);
  };
  // sum of squared deviations of the daily means around a class intercept
  const auto mean_ss = [&](int cls) {
    double ss = 0.0;
    for (int dc = 0; dc < I.n_day_cells; ++dc)
      if (day_class(1 + dc % I.nd) == cls) {
        const double e = st_.wm[dc] - I.beta0_class(cls);
        ss += e * e;
      }
    return ss;
  };

  if (spec_.variant == Variant::kM5) {
    const auto qf = I.surface_quadforms(I.r_llt);
    st_.sig0sq = draw_ig(a + 0.5 * I.n * m_main, b + 0.5 * qf[0], 0);
    st_.sig1sq = draw_ig(a + 0.5 * m_main, b + 0.5 * mean_ss(0), 1);
    st_.sig0sq_d1 = draw_ig(a + 0.5 * I.n * (I.T - 1), b + 0.5 * qf[1], 2);
    st_.sig1sq_d1 = draw_ig(a + 0.5 * (I.T - 1), b + 0.5 * mean_ss(1), 3);
    st_.sig0sq_d2 = draw_ig(a + 0.5 * I.n * (I.T - 1), b + 0.5 * qf[2], 4);
    st_.sig1sq_d2 = draw_ig(a + 0.5 * (I.T - 1), b + 0.5 * mean_ss(2), 5);
    return;
  }
  const double qf_static =
      I.r_llt.matrixL().solve(st_.v_static).squaredNorm();
  st_.sig0sq = draw_ig(a + 0.5 * I.n, b + 0.5 * qf_static, 0);
  if (spec_.variant == Variant::kM3) {
    double ss = 0.0;
    for (double w : st_.w_annual) {
      const double e = w - st_.beta0;
      ss += e * e;
    }
    st_.sig1sq = draw_ig(a + 0.5 * (I.T - 1), b + 0.5 * ss, 1);
  } else if (spec_.variant == Variant::kM4) {
    st_.sig1sq = draw_ig(a + 0.5 * m_main, b + 0.5 * mean_ss(0), 1);
    st_.sig1sq_d1 = draw_ig(a + 0.5 * (I.T - 1), b + 0.5 * mean_ss(1), 2);
    st_.sig1sq_d2 = draw_ig(a + 0.5 * (I.T - 1), b + 0.5 * mean_ss(2), 3);
  }
}

void GibbsEngine::sweep(int sweep_index) {
  const auto run = [&](int tag, auto&& fn) {
    RngStream r = stream_for(sweep_index, tag);
    fn(r);
  };
  run(0, [&](RngStream& r) { step_ties(r); });
  run(1, [&](RngStream& r) { step_latent(r); });
  run(2, [&](RngStream& r) { step_lambda(r); });
  run(3, [&](RngStream& r) { step_beta(r); });
  run(4, [&](RngStream& r) { step_surfaces(r); });
  run(5, [&](RngStream& r) { step_means(r); });
  run(6, [&](RngStream& r) { step_phi(r); });
  run(7, [&](RngStream& r) { step_variances(r); });
}

void GibbsEngine::freeze_adaptation() { st_.phi_adapt.freeze(); }

double GibbsEngine::lambda_acceptance() const {
  return impl_->lam_tot
             ? static_cast<double>(impl_->lam_acc) / impl_->lam_tot
             : 0.0;
}

void GibbsEngine::reset_acceptance_counters() {
  impl_->lam_acc = impl_->lam_tot = 0;
  st_.phi_adapt.reset_acceptance();
}

RngStream GibbsEngine::stream_for(int sweep_index, int step_tag) const {
  return impl_->root.fork(static_cast<uint64_t>(sweep_index) *
                              kStreamsPerSweep +
                          step_tag);
}

std::vector<std::string> GibbsEngine::param_names(const ModelSpec& spec,
                                                  const FitData& data) {
  std::vector<std::string> out;
  if (spec.variant == Variant::kM0) return out;
  const int co = spec.intercept_in_beta ? 0 : 1;
  if (!spec.intercept_in_beta) out.emplace_back("beta0");
  for (int j = co; j < design::kNumCovariates; ++j)
    out.push_back(std::string("beta[") + design::kCovariateNames[j] + "]");
  out.emplace_back("beta0_d1");
  out.emplace_back("beta_d1[trend1]");
  out.emplace_back("beta_d1[lag]");
  out.emplace_back("beta0_d2");
  out.emplace_back("beta_d2[trend1]");
  out.emplace_back("beta_d2[lag]");
  const Variant v = spec.variant;
  if (v >= Variant::kM2) out.emplace_back("sigma0_sq");
  if (v >= Variant::kM3) out.emplace_back("sigma1_sq");
  if (v == Variant::kM5) out.emplace_back("sigma0_sq_d1");
  if (v >= Variant::kM4) out.emplace_back("sigma1_sq_d1");
  if (v == Variant::kM5) out.emplace_back("sigma0_sq_d2");
  if (v >= Variant::kM4) out.emplace_back("sigma1_sq_d2");
  if (v >= Variant::kM2) out.emplace_back("phi0");
  if (v == Variant::kM3)
    for (int t = 2; t <= data.T; ++t)
      out.push_back("w_year[" + std::to_string(t) + "]");
  return out;
}

Eigen::VectorXd GibbsEngine::param_vector() const {
  std::vector<double> out;
  if (!spec_.intercept_in_beta) out.push_back(st_.beta0);
  for (int j = 0; j < st_.beta.size(); ++j) out.push_back(st_.beta[j]);
  out.push_back(st_.beta0_d1);
  out.push_back(st_.beta_d1[0]);
  out.push_back(st_.beta_d1[1]);
  out.push_back(st_.beta0_d2);
  out.push_back(st_.beta_d2[0]);
  out.push_back(st_.beta_d2[1]);
  const Variant v = spec_.variant;
  if (v >= Variant::kM2) out.push_back(st_.sig0sq);
  if (v >= Variant::kM3) out.push_back(st_.sig1sq);
  if (v == Variant::kM5) out.push_back(st_.sig0sq_d1);
  if (v >= Variant::kM4) out.push_back(st_.sig1sq_d1);
  if (v == Variant::kM5) out.push_back(st_.sig0sq_d2);
  if (v >= Variant::kM4) out.push_back(st_.sig1sq_d2);
  if (v >= Variant::kM2) out.push_back(st_.phi);
  if (v == Variant::kM3)
    for (double w : st_.w_annual) out.push_back(w);
  return Eigen::Map<const Eigen::VectorXd>(out.data(),
                                           static_cast<long>(out.size()));
}

PosteriorDraws run_chain(const ModelSpec& spec, const FitData& data) {
  if (spec.iterations < 1) throw Error("run_chain: iterations must be >= 1");
  if (spec.chains < 1) throw Error("run_chain: chains must be >= 1");
  if (spec.target_draws < 1)
    throw Error("run_chain: target_draws must be >= 1");
  const int burn = spec.burnin < 0 ? spec.iterations / 2 : spec.burnin;
  if (burn >= spec.iterations)
    throw Error("run_chain: burn-in leaves no retained draws");
  const int post = spec.iterations - burn;
  const int thin = std::max(1, post / spec.target_draws);
  const int n_keep = std::min(spec.target_draws, post / thin);

  PosteriorDraws out;
  out.meta.variant = spec.variant;
  out.meta.T = data.T;
  out.meta.n_days = data.n_days;
  out.meta.n_sites = data.n_sites;
  out.meta.chains = spec.chains;
  out.meta.draws_per_chain = n_keep;
  out.meta.iterations = spec.iterations;
  out.meta.burnin = burn;
  out.meta.thin = thin;
  out.meta.seed = spec.seed;
  out.meta.priors = spec.priors;
  out.meta.site_ids = data.site_ids;
  out.meta.x_km = data.x_km;
  out.meta.y_km = data.y_km;
  out.meta.dist_coast = data.dist_coast;
  out.meta.log_dist = data.log_dist;
  out.meta.basis = data.basis;
  out.meta.scale_main = data.scale_main;
  out.meta.scale_init1 = data.scale_init1;
  out.meta.scale_init2 = data.scale_init2;
  out.meta.first_year = data.first_year;
  out.param_names = GibbsEngine::param_names(spec, data);

  if (spec.variant == Variant::kM0) {
    out.params.assign(spec.chains, Eigen::MatrixXd::Zero(n_keep, 0));
    return out;
  }

  const int n_params = static_cast<int>(out.param_names.size());
  const bool with_surfaces = spec.variant >= Variant::kM2;
  const bool with_day_means = spec.variant >= Variant::kM4;
  out.params.assign(spec.chains, Eigen::MatrixXd::Zero(n_keep, n_params));
  if (with_surfaces) out.surfaces.resize(spec.chains);
  if (with_day_means) out.day_means.resize(spec.chains);
  if (spec.keep_latent) {
    out.latent_y.resize(spec.chains);
    out.latent_lam.resize(spec.chains);
  }

  for (int c = 0; c < spec.chains; ++c) {
    GibbsEngine eng(spec, data, c);
    int kept = 0;
    for (int i = 1; i <= spec.iterations; ++i) {
      if (i == burn + 1) {
        eng.freeze_adaptation();
        eng.reset_acceptance_counters();
      }
      eng.sweep(i);
      if (i > burn && (i - burn) % thin == 0 && kept < n_keep) {
        out.params[c].row(kept) = eng.param_vector().transpose();
        const ChainState& st = eng.state();
        if (with_surfaces) {
          if (spec.variant == Variant::kM5)
            out.surfaces[c].push_back(st.w_daily);
          else
            out.surfaces[c].push_back(st.v_static.transpose());
        }
        if (with_day_means)
          out.day_means[c].emplace_back(Eigen::Map<const Eigen::VectorXd>(
              st.wm.data(), static_cast<long>(st.wm.size())));
        if (spec.keep_latent) {
          out.latent_y[c].emplace_back(Eigen::Map<const Eigen::VectorXd>(
              st.y.data(), static_cast<long>(st.y.size())));
          out.latent_lam[c].emplace_back(Eigen::Map<const Eigen::VectorXd>(
              st.lam.data(), static_cast<long>(st.lam.size())));
        }
        ++kept;
      }
    }
    out.meta.lambda_acceptance.push_back(eng.lambda_acceptance());
    out.meta.phi_acceptance.push_back(
        spec.variant >= Variant::kM2 ? eng.phi_acceptance() : 0.0);
  }
  return out;
}

PosteriorDraws run_chain(const ModelSpec& spec,
                         const records::TemperaturePanel& panel,
                         const records::RecordTensor& obs) {
  const FitData fd = build_fit_data(panel, obs);
  return run_chain(spec, fd);
}

}  // namespace recbayes::mcmc
