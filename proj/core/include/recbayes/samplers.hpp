#pragma once

#include <Eigen/Dense>

#include "recbayes/rng.hpp"
#include "recbayes/stats.hpp"

namespace recbayes::samplers {

// Exact draw from the asymptotic Kolmogorov-Smirnov distribution by
// series-based rejection on the two series representations, split at 0.75.
double sample_ks(RngStream& rng);

// N(mu, sd^2) truncated to (lo, hi); either bound may be infinite.  Central
// regions use the inverse cdf, tails the exponential-envelope rejection.
double sample_truncated_normal(RngStream& rng, double mu, double sd, double lo,
                               double hi);

// Cholesky of a covariance, adding escalating diagonal jitter if the plain
// factorization fails (tied coordinates make exponential kernels singular)
Eigen::LLT<Eigen::MatrixXd> chol_with_jitter(Eigen::MatrixXd cov);

// multivariate normal from a covariance; Cholesky with escalating jitter
Eigen::VectorXd sample_mvn(RngStream& rng, const Eigen::VectorXd& mean,
                           const Eigen::MatrixXd& cov);

// draw from N(A^-1 b, A^-1) given the precision matrix A
Eigen::VectorXd sample_mvn_from_precision(RngStream& rng,
                                          const Eigen::MatrixXd& a,
                                          const Eigen::VectorXd& b);

double sample_gamma(RngStream& rng, double shape, double rate);
double sample_inverse_gamma(RngStream& rng, double shape, double scale);

// Robbins-Monro style scale adaptation for a random-walk proposal: after each
// batch the log sd moves by +-min(0.01, batch^-1/2) toward the target
// acceptance rate; frozen after burn-in so the chain stays Markovian.
class AdaptiveRWState {
 public:
  explicit AdaptiveRWState(double log_sd = 0.0, double target = 0.33,
                           int batch_size = 50)
      : log_sd_(log_sd), target_(target), batch_size_(batch_size) {}

  double sd() const { return std::exp(log_sd_); }
  double log_sd() const { return log_sd_; }
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  double acceptance_rate() const {
    return total_ ? static_cast<double>(accepted_) / total_ : 0.0;
  }
  void reset_acceptance() { accepted_ = 0; total_ = 0; }

  void notify(bool accepted) {
    ++total_;
    accepted_ += accepted;
    if (frozen_) return;
    ++batch_count_;
    batch_accepted_ += accepted;
    if (batch_count_ == batch_size_) {
      ++batches_;
      const double delta =
          std::min(0.01, 1.0 / std::sqrt(static_cast<double>(batches_)));
      const double rate = static_cast<double>(batch_accepted_) / batch_size_;
      log_sd_ += (rate > target_) ? delta : -delta;
      batch_count_ = 0;
      batch_accepted_ = 0;
    }
  }

 private:
  double log_sd_;
  double target_;
  int batch_size_;
  bool frozen_ = false;
  int batch_count_ = 0, batch_accepted_ = 0;
  long batches_ = 0;
  long accepted_ = 0, total_ = 0;
};

// One random-walk Metropolis step on log(x) for a positive scalar; the
// Jacobian of the log transform is included.  log_target need not be
// normalized.  Returns whether the proposal was accepted.
template <class LogTarget>
bool adaptive_rw_step(RngStream& rng, AdaptiveRWState& state, double& x,
                      double& log_target_cache, LogTarget&& log_target) {
  const double prop = x * std::exp(state.sd() * rng.normal());
  const double lt = log_target(prop);
  const double logr = lt - log_target_cache + std::log(prop) - std::log(x);
  const bool accept = std::log(rng.uniform()) < logr;
  if (accept) {
    x = prop;
    log_target_cache = lt;
  }
  state.notify(accept);
  return accept;
}

}  // namespace recbayes::samplers
