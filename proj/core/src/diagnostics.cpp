#include "recbayes/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "recbayes/detail/parallel.hpp"
#include "recbayes/krige.hpp"
#include "recbayes/samplers.hpp"
#include "recbayes/stats.hpp"

namespace recbayes::diagnostics {

double brier(const std::vector<double>& probabilities,
             const std::vector<int>& outcomes) {
  if (probabilities.size() != outcomes.size())
    throw Error("brier: probability/outcome length mismatch");
  if (probabilities.empty()) throw Error("brier: empty input");
  std::vector<double> sq(probabilities.size());
  for (size_t i = 0; i < sq.size(); ++i) {
    const double d = outcomes[i] - probabilities[i];
    sq[i] = d * d;
  }
  return stats::shifted_mean(sq);
}

double auc(const std::vector<double>& scores,
           const std::vector<int>& outcomes) {
  if (scores.size() != outcomes.size())
    throw Error("auc: score/outcome length mismatch");
  const long n = static_cast<long>(scores.size());
  long n_pos = 0;
  for (int y : outcomes) n_pos += y != 0;
  const long n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw Error("auc: undefined with a single outcome class");

  // rank-sum form of the Mann-Whitney statistic with midranks for ties
  std::vector<long> order(n);
  for (long i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](long a, long b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  long i = 0;
  while (i < n) {
    long j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * (i + 1 + j);  // average of ranks i+1..j
    for (long k = i; k < j; ++k)
      if (outcomes[order[k]] != 0) rank_sum_pos += midrank;
    i = j;
  }
  const double u = rank_sum_pos - 0.5 * n_pos * (n_pos + 1.0);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

namespace {

double bernoulli_deviance(const Eigen::VectorXd& p,
                          const std::vector<int>& y) {
  std::vector<double> terms(y.size());
  for (size_t i = 0; i < y.size(); ++i) {
    const double pi = p[static_cast<long>(i)];
    const double ll = y[i] != 0 ? std::log(pi) : std::log1p(-pi);
    if (!std::isfinite(ll))
      throw Error("dic: infinite deviance (degenerate probability)");
    terms[i] = -2.0 * ll;
  }
  return stats::comp_sum(terms);
}

}  // namespace

DicResult dic(const Eigen::MatrixXd& probs, const std::vector<int>& outcomes) {
  if (probs.cols() != static_cast<long>(outcomes.size()))
    throw Error("dic: probability/outcome length mismatch");
  if (probs.rows() < 1 || probs.cols() < 1) throw Error("dic: empty input");
  const long k = probs.rows();
  std::vector<double> dev(k);
  for (long i = 0; i < k; ++i) dev[i] = bernoulli_deviance(probs.row(i), outcomes);
  Eigen::VectorXd p_bar(probs.cols());
  std::vector<double> col(k);
  for (long j = 0; j < probs.cols(); ++j) {
    for (long i = 0; i < k; ++i) col[i] = probs(i, j);
    p_bar[j] = stats::shifted_mean(col);
  }
  DicResult out;
  out.d_hat = stats::shifted_mean(dev);
  out.p_d = out.d_hat - bernoulli_deviance(p_bar, outcomes);
  out.dic = out.d_hat + out.p_d;
  return out;
}

void PITAccumulator::add(double p_below, double p_at) {
  if (p_below > p_at) throw Error("pit: cdf steps out of order");
  if (p_below < 0.0 || p_at > 1.0) throw Error("pit: cdf step outside [0,1]");
  // F(u) climbs linearly from 0 to 1 across (p_below, p_at]; a zero-width
  // step degenerates to a jump at p_at
  const auto f = [&](double u) -> double {
    if (u <= p_below) return p_at > p_below ? 0.0 : (u >= p_at ? 1.0 : 0.0);
    if (u >= p_at) return 1.0;
    return (u - p_below) / (p_at - p_below);
  };
  for (int j = 0; j < kBins; ++j)
    sums_[j] += f((j + 1) / 10.0) - f(j / 10.0);
  ++count_;
}

std::vector<double> PITAccumulator::masses() const {
  if (count_ == 0) throw Error("pit: no observations accumulated");
  std::vector<double> out(kBins);
  for (int j = 0; j < kBins; ++j) out[j] = sums_[j] / count_;
  return out;
}

std::pair<double, double> pit_steps_from_draws(const std::vector<double>& draws,
                                               double observed) {
  if (draws.empty()) throw Error("pit: empty predictive sample");
  long below = 0, at_or_below = 0;
  for (double v : draws) {
    below += v < observed;
    at_or_below += v <= observed;
  }
  const double n = static_cast<double>(draws.size());
  return {below / n, at_or_below / n};
}

std::vector<double> ad_metric(const Eigen::MatrixXd& n_obs,
                              const std::vector<Eigen::MatrixXd>& n_pred) {
  if (n_pred.empty()) throw Error("ad_metric: no predictive draws");
  for (const auto& m : n_pred)
    if (m.rows() != n_obs.rows() || m.cols() != n_obs.cols())
      throw Error("ad_metric: misaligned predictive draws");
  if (n_obs.rows() < 1 || n_obs.cols() < 1)
    throw Error("ad_metric: empty input");
  std::vector<double> out(n_obs.rows(), 0.0);
  std::vector<double> cell(n_pred.size() * n_obs.cols());
  for (long t = 0; t < n_obs.rows(); ++t) {
    size_t at = 0;
    for (size_t k = 0; k < n_pred.size(); ++k)
      for (long j = 0; j < n_obs.cols(); ++j)
        cell[at++] = std::abs(n_obs(t, j) - n_pred[k](t, j));
    out[t] = stats::shifted_mean(cell);
  }
  return out;
}

namespace {

// halve every chain: m chains of length L become 2m sequences of length L/2
std::vector<Eigen::VectorXd> split_chains(
    const std::vector<Eigen::VectorXd>& chains) {
  // splitting makes one chain enough: its halves act as two sequences
  if (chains.empty()) throw Error("psrf: no chains");
  const long len = chains[0].size();
  for (const auto& c : chains)
    if (c.size() != len) throw Error("psrf: chains of unequal length");
  const long h = len / 2;
  if (h < 2) throw Error("psrf: chains too short to split");
  std::vector<Eigen::VectorXd> out;
  for (const auto& c : chains) {
    out.push_back(c.head(h));
    out.push_back(c.segment(h, h));
  }
  return out;
}

}  // namespace

double psrf(const std::vector<Eigen::VectorXd>& chains) {
  const auto seqs = split_chains(chains);
  const long m = static_cast<long>(seqs.size());
  const double n = static_cast<double>(seqs[0].size());
  std::vector<double> means(m), vars(m);
  for (long j = 0; j < m; ++j) {
    std::vector<double> v(seqs[j].data(), seqs[j].data() + seqs[j].size());
    means[j] = stats::shifted_mean(v);
    vars[j] = stats::variance(v);
  }
  const double w = stats::shifted_mean(vars);
  if (!(w > 0.0)) throw Error("psrf: degenerate within-chain variance");
  const double b_over_n = stats::variance(means);  // B/n
  const double var_plus = (n - 1.0) / n * w + b_over_n;
  return std::sqrt(var_plus / w);
}

double psrf_multivariate(const std::vector<Eigen::MatrixXd>& chains) {
  if (chains.empty()) throw Error("psrf: no chains");
  const long len = chains[0].rows(), p = chains[0].cols();
  for (const auto& c : chains)
    if (c.rows() != len || c.cols() != p)
      throw Error("psrf: chains of unequal shape");
  const long h = len / 2;
  if (h < 2) throw Error("psrf: chains too short to split");
  if (p < 1) throw Error("psrf: no parameters");

  std::vector<Eigen::MatrixXd> seqs;
  for (const auto& c : chains) {
    seqs.push_back(c.topRows(h));
    seqs.push_back(c.middleRows(h, h));
  }
  const long m = static_cast<long>(seqs.size());
  const double n = static_cast<double>(h);

  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd means(m, p);
  for (long j = 0; j < m; ++j) {
    const Eigen::RowVectorXd mu = seqs[j].colwise().mean();
    means.row(j) = mu;
    const Eigen::MatrixXd centered = seqs[j].rowwise() - mu;
    w += centered.transpose() * centered / (n - 1.0);
  }
  w /= static_cast<double>(m);
  const Eigen::RowVectorXd grand = means.colwise().mean();
  const Eigen::MatrixXd dm = means.rowwise() - grand;
  const Eigen::MatrixXd b_over_n =
      dm.transpose() * dm / (static_cast<double>(m) - 1.0);

  Eigen::LLT<Eigen::MatrixXd> llt(w);
  if (llt.info() != Eigen::Success)
    throw Error("psrf: degenerate within-chain covariance");
  const Eigen::MatrixXd l = llt.matrixL();
  const Eigen::MatrixXd whitened = l.triangularView<Eigen::Lower>().solve(
      l.triangularView<Eigen::Lower>().solve(b_over_n).transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (whitened + whitened.transpose()));
  const double lambda = es.eigenvalues().maxCoeff();
  const double r2 = (n - 1.0) / n +
                    (static_cast<double>(m) + 1.0) / static_cast<double>(m) *
                        lambda;
  return std::sqrt(r2);
}

std::vector<double> psrf_all(const mcmc::PosteriorDraws& draws) {
  if (draws.params.empty()) throw Error("psrf: no chains");
  std::vector<double> out;
  for (int j = 0; j < draws.n_params(); ++j) {
    std::vector<Eigen::VectorXd> cols;
    for (const auto& chain : draws.params) cols.push_back(chain.col(j));
    out.push_back(psrf(cols));
  }
  return out;
}

void CVPlan::validate(const std::vector<std::string>& all_sites) const {
  if (groups.empty()) throw Error("cv plan: no groups");
  std::set<std::string> seen;
  size_t total = 0, lo = SIZE_MAX, hi = 0;
  for (const auto& g : groups) {
    if (g.empty()) throw Error("cv plan: empty group");
    lo = std::min(lo, g.size());
    hi = std::max(hi, g.size());
    for (const auto& id : g)
      if (!seen.insert(id).second)
        throw Error("cv plan: site appears in two groups: " + id);
    total += g.size();
  }
  if (hi - lo > 1) throw Error("cv plan: group sizes differ by more than one");
  if (total != all_sites.size())
    throw Error("cv plan: plan does not cover the site set");
  for (const auto& id : all_sites)
    if (!seen.count(id)) throw Error("cv plan: unknown site " + id);
}

CVPlan make_cv_plan(const std::vector<std::string>& site_ids, int n_groups,
                    uint64_t seed) {
  if (n_groups < 2 || n_groups > static_cast<int>(site_ids.size()))
    throw Error("cv plan: bad group count");
  CVPlan plan;
  plan.seed = seed;
  std::vector<std::string> ids = site_ids;
  RngStream rng(seed);
  for (size_t i = ids.size(); i > 1; --i)
    std::swap(ids[i - 1], ids[rng.uniform_below(i)]);
  plan.groups.assign(n_groups, {});
  for (size_t i = 0; i < ids.size(); ++i)
    plan.groups[i % n_groups].push_back(ids[i]);
  plan.validate(site_ids);
  return plan;
}

namespace {

struct FoldScore {
  // per period: accumulated squared error, count, positives, and the raw
  // score/outcome lists for the fold AUC
  std::vector<std::vector<double>> scores;
  std::vector<std::vector<int>> outcomes;
};

records::TemperaturePanel subset_panel(const records::TemperaturePanel& panel,
                                       const std::vector<int>& sites) {
  records::TemperaturePanel out;
  out.n_years = panel.n_years;
  out.n_days = panel.n_days;
  out.first_year = panel.first_year;
  for (int s : sites) {
    out.site_ids.push_back(panel.site_ids[s]);
    out.x_km.push_back(panel.x_km[s]);
    out.y_km.push_back(panel.y_km[s]);
    out.dist_coast_km.push_back(panel.dist_coast_km[s]);
  }
  out.init_storage();
  for (size_t i = 0; i < sites.size(); ++i)
    for (int t = 1; t <= panel.n_years; ++t)
      for (int d = 1; d <= panel.n_days; ++d)
        out.at(static_cast<int>(i), t, d) = panel.at(sites[i], t, d);
  return out;
}

}  // namespace

CrossvalResult run_crossval(const mcmc::ModelSpec& spec,
                            const records::TemperaturePanel& panel,
                            const CVPlan& plan,
                            const std::vector<CrossvalPeriod>& periods,
                            int fold_threads) {
  plan.validate(panel.site_ids);
  if (periods.empty()) throw Error("crossval: no scoring periods");
  for (const auto& p : periods)
    if (p.t_lo < 2 || p.t_lo > p.t_hi || p.t_hi > panel.n_years)
      throw Error("crossval: period outside years 2..T");

  const int n_folds = static_cast<int>(plan.groups.size());
  std::vector<FoldScore> fold_scores(n_folds);
  std::vector<std::string> fold_errors(n_folds);

  detail::parallel_for(n_folds, fold_threads, [&](int g) {
    try {
      std::vector<int> train, hold;
      std::set<std::string> held(plan.groups[g].begin(),
                                 plan.groups[g].end());
      for (int s = 0; s < panel.n_sites(); ++s)
        (held.count(panel.site_ids[s]) ? hold : train).push_back(s);

      const records::TemperaturePanel train_panel =
          subset_panel(panel, train);
      const records::RecordTensor train_rec =
          records::extract_records(train_panel);
      const mcmc::PosteriorDraws draws =
          mcmc::run_chain(spec, train_panel, train_rec);

      const records::TemperaturePanel hold_panel = subset_panel(panel, hold);
      const records::RecordTensor hold_rec =
          records::extract_records(hold_panel);
      krige::PredictionGrid grid;
      grid.cell_ids = hold_panel.site_ids;
      grid.x_km = hold_panel.x_km;
      grid.y_km = hold_panel.y_km;
      grid.dist_coast_km = hold_panel.dist_coast_km;

      const krige::OneStepField field = krige::one_step_ahead(
          draws, grid, hold_rec, spec.seed + 1000 + g, 1);

      FoldScore& fs = fold_scores[g];
      fs.scores.resize(periods.size());
      fs.outcomes.resize(periods.size());
      for (size_t pi = 0; pi < periods.size(); ++pi)
        for (int t = periods[pi].t_lo; t <= periods[pi].t_hi; ++t)
          for (int d = 1; d <= hold_panel.n_days; ++d)
            for (int s = 0; s < hold_panel.n_sites(); ++s) {
              const int16_t code = hold_rec.at(s, t, d);
              if (code >= 2) continue;  // tie: excluded from the metrics
              if (hold_panel.at(s, t, d) == records::kMissing) continue;
              std::vector<double> p(field.n_draws);
              for (int k = 0; k < field.n_draws; ++k)
                p[k] = field.prob(k, t, d, s);
              fs.scores[pi].push_back(stats::shifted_mean(p));
              fs.outcomes[pi].push_back(code == 1 ? 1 : 0);
            }
    } catch (const std::exception& e) {
      fold_errors[g] = e.what();
      fold_scores[g] = FoldScore{};
    }
  });

  CrossvalResult out;
  for (int g = 0; g < n_folds; ++g)
    if (!fold_errors[g].empty())
      out.errors.push_back("fold " + std::to_string(g) + ": " +
                           fold_errors[g]);

  for (size_t pi = 0; pi < periods.size(); ++pi) {
    CrossvalResult::Summary sum;
    sum.period = periods[pi].label;
    std::vector<double> sq_all, fold_aucs;
    for (int g = 0; g < n_folds; ++g) {
      if (!fold_errors[g].empty()) continue;
      const auto& sc = fold_scores[g].scores[pi];
      const auto& oc = fold_scores[g].outcomes[pi];
      if (sc.empty()) continue;
      FoldMetrics fm;
      fm.fold = g;
      fm.period = periods[pi].label;
      fm.n = static_cast<long>(sc.size());
      for (int y : oc) fm.n_pos += y;
      fm.bs = brier(sc, oc);
      if (fm.n_pos > 0 && fm.n_pos < fm.n) {
        fm.auc = auc(sc, oc);
        fm.auc_valid = true;
        fold_aucs.push_back(fm.auc);
      }
      out.folds.push_back(fm);
      for (size_t i = 0; i < sc.size(); ++i) {
        const double d = oc[i] - sc[i];
        sq_all.push_back(d * d);
      }
      sum.n += fm.n;
    }
    sum.bs = sq_all.empty() ? 0.0 : stats::shifted_mean(sq_all);
    sum.folds_in_auc = static_cast<int>(fold_aucs.size());
    sum.auc = fold_aucs.empty() ? 0.0 : stats::shifted_mean(fold_aucs);
    out.summary.push_back(sum);
  }
  return out;
}

}  // namespace recbayes::diagnostics
