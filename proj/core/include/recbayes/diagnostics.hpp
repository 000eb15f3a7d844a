#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "recbayes/mcmc.hpp"
#include "recbayes/records.hpp"

namespace recbayes::diagnostics {

// mean squared difference between forecast probabilities and binary outcomes
// (callers exclude tied-record cells before scoring)
double brier(const std::vector<double>& probabilities,
             const std::vector<int>& outcomes);

// Mann-Whitney AUC: P(score+ > score-) + 0.5 P(tie).  Requires both classes.
double auc(const std::vector<double>& scores, const std::vector<int>& outcomes);

struct DicResult {
  double dic = 0, d_hat = 0, p_d = 0;
};

// Bernoulli-deviance DIC from per-draw probabilities (draws x observations).
// d_hat averages the per-draw deviance; p_d subtracts the deviance at the
// posterior-mean probabilities, so identical draws give p_d = 0 exactly.
DicResult dic(const Eigen::MatrixXd& probs, const std::vector<int>& outcomes);

// Discrete-data probability integral transform.  Each observation enters as
// the predictive cdf just below and at the attained value; the per-observation
// piecewise-linear cdf sections average into a 10-bin uniformity histogram.
class PITAccumulator {
 public:
  static constexpr int kBins = 10;

  void add(double p_below, double p_at);
  long count() const { return count_; }
  std::vector<double> masses() const;  // f_1..f_10, sum 1

 private:
  std::array<double, kBins> sums_{};
  long count_ = 0;
};

// cdf step of a discrete observed value under an empirical predictive sample:
// {P(X < observed), P(X <= observed)}
std::pair<double, double> pit_steps_from_draws(const std::vector<double>& draws,
                                               double observed);

// Per-year mean absolute deviation between observed cumulative record counts
// and their per-draw predictive counterparts.  Rows index years; columns index
// aligned (day, location) pairs.
std::vector<double> ad_metric(const Eigen::MatrixXd& n_obs,
                              const std::vector<Eigen::MatrixXd>& n_pred);

// Split-chain Gelman-Rubin potential scale reduction factor for one
// parameter.  Each chain is halved, so m chains of length L enter as 2m
// sequences of length L/2.
double psrf(const std::vector<Eigen::VectorXd>& chains);

// Multivariate factor via the largest eigenvalue of W^-1 B/n on the split
// sequences, reported on the same square-root scale as the marginal factor.
double psrf_multivariate(const std::vector<Eigen::MatrixXd>& chains);

// marginal psrf for every retained parameter of a fit
std::vector<double> psrf_all(const mcmc::PosteriorDraws& draws);

// Spatial cross-validation: sites are dealt into equal groups, each group is
// held out in turn, and one-step-ahead forecasts at the held-out sites are
// scored per period of years.
struct CVPlan {
  std::vector<std::vector<std::string>> groups;
  uint64_t seed = 0;

  void validate(const std::vector<std::string>& all_sites) const;
};

CVPlan make_cv_plan(const std::vector<std::string>& site_ids, int n_groups,
                    uint64_t seed);

struct CrossvalPeriod {
  std::string label;
  int t_lo = 0, t_hi = 0;  // year indices, inclusive
};

struct FoldMetrics {
  int fold = 0;
  std::string period;
  double bs = 0;
  double auc = 0;
  long n = 0, n_pos = 0;
  bool auc_valid = false;  // false when the fold lacks one of the classes
};

struct CrossvalResult {
  struct Summary {
    std::string period;
    double bs = 0;   // pooled over observations
    double auc = 0;  // averaged over folds with both classes
    int folds_in_auc = 0;
    long n = 0;
  };

  std::vector<FoldMetrics> folds;
  std::vector<Summary> summary;
  std::vector<std::string> errors;  // per-fold failure notes; fold skipped
};

// Tied-record and missing observations are excluded from the scores.  Folds
// run concurrently under `fold_threads`; a failed fold is reported in
// `errors` and the others continue.
CrossvalResult run_crossval(const mcmc::ModelSpec& spec,
                            const records::TemperaturePanel& panel,
                            const CVPlan& plan,
                            const std::vector<CrossvalPeriod>& periods,
                            int fold_threads = 1);

}  // namespace recbayes::diagnostics
