#include "recbayes/samplers.hpp"

#include <cmath>

namespace recbayes::samplers {

namespace {

constexpr double kSplit = 0.75;                      // series split point
const double kT0 = M_PI * M_PI / (8.0 * kSplit * kSplit);
constexpr double kLeftSlack = 1e-6;  // envelope slack for the left branch
// P(K < 0.75), evaluated once from the rapidly converging cdf series
const double kPLeft = stats::ks_cdf(kSplit);

// Right branch: density 8x sum (-1)^{n+1} n^2 exp(-2 n^2 x^2) on [0.75, inf).
// Proposal ~ x exp(-2x^2); the alternating partial sums bracket the
// acceptance ratio, so acceptance is decided exactly.
double sample_ks_right(RngStream& rng) {
  for (;;) {
    const double x = std::sqrt(kSplit * kSplit + 0.5 * rng.expo());
    const double u = rng.uniform();
    double s = 1.0;
    bool accepted = false, decided = false;
    for (int n = 2; n < 200; ++n) {
      const double nn = static_cast<double>(n) * n;
      const double term = nn * std::exp(-2.0 * (nn - 1.0) * x * x);
      if (n % 2 == 0) {
        s -= term;  // lower bound of the ratio
        if (u <= s) { accepted = true; decided = true; break; }
      } else {
        s += term;  // upper bound of the ratio
        if (u > s) { decided = true; break; }
      }
      if (term < 1e-15 * s) { accepted = u <= s; decided = true; break; }
    }
    if (decided && accepted) return x;
    if (!decided) throw Error("sample_ks: series failed to resolve (right)");
  }
}

// Left branch via t = pi^2/(8 x^2) on [t0, inf):
//   f(t) ~ sum_{n odd} (2 n^2 t - 1) t^{-1/2} e^{-n^2 t}.
// The n=1 term dominates up to a factor 1 + 3e-7 on this range; remaining
// terms are added until they fall below 1e-15 relative.
double sample_ks_left(RngStream& rng) {
  for (;;) {
    // T ~ sqrt(t) e^{-t} on [t0, inf) by rejection from a shifted exponential
    double t;
    for (;;) {
      t = kT0 + 2.0 * rng.expo();
      if (rng.uniform() <= std::sqrt(t / kT0) * std::exp(-0.5 * (t - kT0)))
        break;
    }
    // thin to the full n=1 term (2 sqrt(t) - 1/sqrt(t)) e^{-t}
    if (rng.uniform() > 1.0 - 0.5 / t) continue;
    // series acceptance against the inflated n=1 envelope
    const double u = rng.uniform() * (1.0 + kLeftSlack);
    double ratio = 1.0;
    for (int n = 3; n < 61; n += 2) {
      const double nn = static_cast<double>(n) * n;
      const double term =
          std::exp(-(nn - 1.0) * t) * (2.0 * nn * t - 1.0) / (2.0 * t - 1.0);
      ratio += term;
      if (term < 1e-15 * ratio) break;
    }
    if (u <= ratio) return M_PI / std::sqrt(8.0 * t);
  }
}

}  // namespace

double sample_ks(RngStream& rng) {
  if (rng.uniform() < kPLeft) return sample_ks_left(rng);
  return sample_ks_right(rng);
}

namespace {

// one-sided standardized draw from N(0,1) truncated to [a, inf)
double tn_lower(RngStream& rng, double a) {
  if (a > 38.0) throw Error("sample_truncated_normal: bound beyond +-38 sd");
  if (a <= 0.4) {
    // central: inverse cdf on the upper tail survival scale
    const double sf = stats::norm_sf(a);
    return -stats::norm_quantile(rng.uniform() * sf);
  }
  // exponential envelope (tail rejection)
  const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double x = a + rng.expo() / alpha;
    const double d = x - alpha;
    if (std::log(rng.uniform()) <= -0.5 * d * d) return x;
  }
}

}  // namespace

double sample_truncated_normal(RngStream& rng, double mu, double sd, double lo,
                               double hi) {
  if (!(sd > 0.0)) throw Error("sample_truncated_normal: sd must be positive");
  if (!(lo < hi)) throw Error("sample_truncated_normal: empty interval");
  const double a = (lo - mu) / sd, b = (hi - mu) / sd;
  const bool a_inf = std::isinf(a) && a < 0, b_inf = std::isinf(b) && b > 0;

  double z;
  if (a_inf && b_inf) {
    z = rng.normal();
  } else if (b_inf) {
    z = tn_lower(rng, a);
  } else if (a_inf) {
    z = -tn_lower(rng, -b);
  } else {
    if (a > 38.0 || b < -38.0)
      throw Error("sample_truncated_normal: interval beyond +-38 sd");
    if (a > 0.4) {
      // two-sided in the upper tail: envelope rejection with interval check
      const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
      for (;;) {
        const double x = a + rng.expo() / alpha;
        if (x > b) continue;
        const double d = x - alpha;
        if (std::log(rng.uniform()) <= -0.5 * d * d) { z = x; break; }
      }
    } else if (b < -0.4) {
      return 2.0 * mu - sample_truncated_normal(rng, mu, sd, 2.0 * mu - hi,
                                                2.0 * mu - lo);
    } else {
      const double fa = stats::norm_cdf(a), fb = stats::norm_cdf(b);
      const double p = fa + rng.uniform() * (fb - fa);
      z = stats::norm_quantile(std::min(std::max(p, 1e-300), 1.0 - 1e-16));
    }
  }
  return mu + sd * z;
}

Eigen::LLT<Eigen::MatrixXd> chol_with_jitter(Eigen::MatrixXd cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt;
  const double base = cov.diagonal().mean();
  for (double j = 1e-10; j <= 1.0000001e-6; j *= 10.0) {
    Eigen::MatrixXd c = cov;
    c.diagonal().array() += j * base;
    llt.compute(c);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw Error("chol_with_jitter: not positive definite after jitter");
}

Eigen::VectorXd sample_mvn(RngStream& rng, const Eigen::VectorXd& mean,
                           const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols() || cov.rows() != mean.size())
    throw Error("sample_mvn: dimension mismatch");
  const auto llt = chol_with_jitter(cov);
  Eigen::VectorXd z(mean.size());
  for (int i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + llt.matrixL() * z;
}

Eigen::VectorXd sample_mvn_from_precision(RngStream& rng,
                                          const Eigen::MatrixXd& a,
                                          const Eigen::VectorXd& b) {
  if (a.rows() != a.cols() || a.rows() != b.size())
    throw Error("sample_mvn_from_precision: dimension mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success)
    throw Error("sample_mvn_from_precision: precision not positive definite");
  const Eigen::VectorXd mean = llt.solve(b);
  Eigen::VectorXd z(b.size());
  for (int i = 0; i < z.size(); ++i) z[i] = rng.normal();
  // A = L L^T  =>  cov chol factor is L^-T
  return mean + llt.matrixU().solve(z);
}

double sample_gamma(RngStream& rng, double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw Error("sample_gamma: shape and rate must be positive");
  if (shape < 1.0) {
    const double g = sample_gamma(rng, shape + 1.0, rate);
    return g * std::pow(rng.uniform(), 1.0 / shape);
  }
  // Marsaglia-Tsang squeeze
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

double sample_inverse_gamma(RngStream& rng, double shape, double scale) {
  return scale / sample_gamma(rng, shape, 1.0);
}

}  // namespace recbayes::samplers
