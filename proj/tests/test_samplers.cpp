#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "recbayes/rng.hpp"
#include "recbayes/samplers.hpp"
#include "recbayes/stats.hpp"

using namespace recbayes;

namespace {

// Kolmogorov goodness-of-fit check at significance ~1e-3: sqrt(n) * D has
// asymptotic cdf ks_cdf, whose 0.999 point is about 1.95.
template <class Cdf>
void check_gof(std::vector<double> sample, Cdf&& cdf, const char* what) {
  const double n = static_cast<double>(sample.size());
  const double d = stats::ks_statistic(std::move(sample), cdf);
  INFO(what << ": sqrt(n) * D = " << std::sqrt(n) * d);
  CHECK(std::sqrt(n) * d < 1.95);
}

}  // namespace

TEST_CASE("ks sampler matches the asymptotic K distribution") {
  RngStream rng(101u);
  const int n = 200000;
  std::vector<double> sample(n);
  double sum = 0;
  for (double& x : sample) {
    x = samplers::sample_ks(rng);
    sum += x;
  }
  check_gof(sample, [](double x) { return stats::ks_cdf(x); }, "ks");
  // E[K] = sqrt(pi/2) * ln 2 ~ 0.868731
  CHECK(sum / n == doctest::Approx(0.8687).epsilon(0.004));
}

TEST_CASE("truncated normal: bounds, moments, tails") {
  RngStream rng(202u);
  SUBCASE("half-normal moment") {
    const int n = 200000;
    std::vector<double> sample(n);
    double sum = 0;
    for (double& x : sample) {
      x = samplers::sample_truncated_normal(rng, 0.0, 1.0, 0.0,
                                            std::numeric_limits<double>::infinity());
      CHECK(x >= 0.0);
      sum += x;
    }
    // E = sqrt(2/pi) ~ 0.7979
    CHECK(sum / n == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(0.01));
    check_gof(sample,
              [](double x) { return 2.0 * stats::norm_cdf(x) - 1.0; },
              "half-normal");
  }
  SUBCASE("far tail draws stay inside and follow the conditional law") {
    const int n = 50000;
    std::vector<double> sample(n);
    for (double& x : sample) {
      x = samplers::sample_truncated_normal(rng, 0.0, 1.0, 8.0,
                                            std::numeric_limits<double>::infinity());
      CHECK(x >= 8.0);
      CHECK(std::isfinite(x));
    }
    const double tail = stats::norm_sf(8.0);
    check_gof(sample,
              [&](double x) { return 1.0 - stats::norm_sf(x) / tail; },
              "tail-normal");
  }
  SUBCASE("two-sided interval with location/scale") {
    const int n = 100000;
    std::vector<double> sample(n);
    for (double& x : sample) {
      x = samplers::sample_truncated_normal(rng, 1.0, 2.0, 0.0, 3.0);
      CHECK(x >= 0.0);
      CHECK(x <= 3.0);
    }
    const double flo = stats::norm_cdf(-0.5), fhi = stats::norm_cdf(1.0);
    check_gof(sample,
              [&](double x) {
                return (stats::norm_cdf((x - 1.0) / 2.0) - flo) / (fhi - flo);
              },
              "two-sided");
  }
}

TEST_CASE("gamma and inverse-gamma samplers") {
  RngStream rng(303u);
  const int n = 200000;
  SUBCASE("gamma(3, 2)") {
    std::vector<double> sample(n);
    for (double& x : sample) x = samplers::sample_gamma(rng, 3.0, 2.0);
    check_gof(sample, [](double x) { return stats::gamma_p(3.0, 2.0 * x); },
              "gamma(3,2)");
  }
  SUBCASE("gamma with shape below one") {
    std::vector<double> sample(n);
    for (double& x : sample) {
      x = samplers::sample_gamma(rng, 0.4, 1.0);
      CHECK(x > 0.0);
    }
    check_gof(sample, [](double x) { return stats::gamma_p(0.4, x); },
              "gamma(0.4,1)");
  }
  SUBCASE("inverse-gamma(2, 300)") {
    std::vector<double> sample(n);
    for (double& x : sample) x = samplers::sample_inverse_gamma(rng, 2.0, 300.0);
    // X ~ IG(a, b)  <=>  1/X ~ Gamma(a, rate b)
    check_gof(sample,
              [](double x) { return stats::gamma_q(2.0, 300.0 / x); },
              "inverse-gamma(2,300)");
  }
}

TEST_CASE("mvn from precision has the right mean and covariance") {
  RngStream rng(404u);
  Eigen::MatrixXd a(3, 3);
  a << 4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0;
  Eigen::VectorXd b(3);
  b << 1.0, -2.0, 0.5;
  const Eigen::VectorXd mean = a.llt().solve(b);
  const Eigen::MatrixXd cov = a.inverse();

  const int n = 100000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(3);
  Eigen::MatrixXd sumsq = Eigen::MatrixXd::Zero(3, 3);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x = samplers::sample_mvn_from_precision(rng, a, b);
    sum += x;
    sumsq += (x - mean) * (x - mean).transpose();
  }
  const Eigen::VectorXd mhat = sum / n;
  const Eigen::MatrixXd chat = sumsq / n;
  for (int j = 0; j < 3; ++j) {
    CHECK(mhat(j) == doctest::Approx(mean(j)).epsilon(0.05));
    for (int k = 0; k < 3; ++k)
      CHECK(std::abs(chat(j, k) - cov(j, k)) < 0.02);
  }
}

TEST_CASE("sample_mvn matches its covariance") {
  RngStream rng(505u);
  Eigen::MatrixXd cov(2, 2);
  cov << 2.0, 0.8, 0.8, 1.0;
  Eigen::VectorXd mean(2);
  mean << -1.0, 3.0;
  const int n = 100000;
  Eigen::MatrixXd sumsq = Eigen::MatrixXd::Zero(2, 2);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(2);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x = samplers::sample_mvn(rng, mean, cov);
    sum += x;
    sumsq += (x - mean) * (x - mean).transpose();
  }
  CHECK((sum / n - mean).lpNorm<Eigen::Infinity>() < 0.02);
  CHECK(((sumsq / n) - cov).lpNorm<Eigen::Infinity>() < 0.05);
}

TEST_CASE("cholesky with jitter survives a singular kernel matrix") {
  // two identical rows/columns: exactly singular
  Eigen::MatrixXd cov(3, 3);
  cov << 1.0, 1.0, 0.3, 1.0, 1.0, 0.3, 0.3, 0.3, 1.0;
  const auto llt = samplers::chol_with_jitter(cov);
  CHECK(llt.info() == Eigen::Success);
  const Eigen::MatrixXd l = llt.matrixL();
  CHECK(((l * l.transpose()) - cov).lpNorm<Eigen::Infinity>() < 1e-4);
}

TEST_CASE("adaptive random walk targets its acceptance rate") {
  RngStream rng(606u);
  samplers::AdaptiveRWState state(std::log(40.0), 0.33, 50);
  double x = 1.0;
  // target: log-normal density for log x => normal RW on log scale
  auto log_target = [](double v) {
    const double lx = std::log(v);
    return -0.5 * lx * lx - lx;
  };
  double cache = log_target(x);
  for (int i = 0; i < 20000; ++i)
    samplers::adaptive_rw_step(rng, state, x, cache, log_target);
  state.reset_acceptance();
  state.freeze();
  const double sd_frozen = state.sd();
  for (int i = 0; i < 20000; ++i)
    samplers::adaptive_rw_step(rng, state, x, cache, log_target);
  CHECK(state.sd() == sd_frozen);  // frozen scale no longer adapts
  CHECK(state.acceptance_rate() > 0.23);
  CHECK(state.acceptance_rate() < 0.43);
}
