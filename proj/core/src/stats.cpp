#include "recbayes/stats.hpp"

#include <cmath>
#include <limits>

#include "recbayes/rng.hpp"

namespace recbayes::stats {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
double norm_sf(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

namespace {

// Acklam's rational approximation to the normal quantile (|err| < 1.2e-9),
// refined below by one Halley step.
double norm_quantile_approx(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    double q = std::sqrt(-2 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p > 1 - plow) {
    double q = std::sqrt(-2 * std::log(1 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  double q = p - 0.5, r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

}  // namespace

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error("norm_quantile: p outside (0,1)");
  double x = norm_quantile_approx(p);
  // Halley refinement
  const double e = norm_cdf(x) - p;
  const double u = e * std::sqrt(2 * M_PI) * std::exp(0.5 * x * x);
  x = x - u / (1 + 0.5 * x * u);
  return x;
}

double log1pexp(double x) {
  if (x > 33.0) return x;
  if (x > -37.0) return std::log1p(std::exp(x));
  return std::exp(x);
}

double inv_logit(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error("logit: p outside (0,1)");
  return std::log(p) - std::log1p(-p);
}

double logistic_cdf(double x) { return inv_logit(x); }

namespace {

constexpr int kMaxIter = 400;
constexpr double kEps = 1e-15;

double gamma_p_series(double a, double x) {
  double ap = a, sum = 1.0 / a, del = sum;
  for (int i = 0; i < kMaxIter; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
  const double fpmin = std::numeric_limits<double>::min() / kEps;
  double b = x + 1.0 - a, c = 1.0 / fpmin, d = 1.0 / b, h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = b + an / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_p(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw Error("gamma_p: invalid arguments");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_contfrac(a, x);
}

double gamma_q(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw Error("gamma_q: invalid arguments");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_contfrac(a, x);
}

double gamma_quantile(double a, double p) {
  if (!(p >= 0.0 && p < 1.0)) throw Error("gamma_quantile: p outside [0,1)");
  if (p == 0.0) return 0.0;
  // Wilson-Hilferty starting point
  const double g = norm_quantile(p);
  double x = a * std::pow(1.0 - 1.0 / (9.0 * a) + g / (3.0 * std::sqrt(a)), 3.0);
  if (x <= 0.0) x = std::exp((std::log(p) + std::lgamma(a + 1.0)) / a);
  for (int i = 0; i < 60; ++i) {
    const double err = gamma_p(a, x) - p;
    const double logpdf = (a - 1.0) * std::log(x) - x - std::lgamma(a);
    double step = err / std::exp(logpdf);
    // dampen steps that would leave the support
    if (x - step <= 0.0) step = x / 2.0;
    x -= step;
    if (std::fabs(step) < 1e-12 * (1.0 + x)) break;
  }
  return x;
}

double ks_cdf(double x) {
  if (x <= 0.0) return 0.0;
  if (x < 0.5) {
    // theta-transformed series, rapid for small x
    const double t = M_PI * M_PI / (8.0 * x * x);
    double s = 0.0;
    for (int k = 1; k < 40; k += 2) {
      const double term = std::exp(-static_cast<double>(k) * k * t);
      s += term;
      if (term < 1e-18 * s) break;
    }
    return std::sqrt(2.0 * M_PI) / x * s;
  }
  double s = 0.0;
  for (int j = 1; j < 200; ++j) {
    const double term = std::exp(-2.0 * j * j * x * x);
    s += (j % 2 == 1) ? term : -term;
    if (term < 1e-18) break;
  }
  return 1.0 - 2.0 * s;
}

double chi2_sf(double x, double dof) { return gamma_q(dof / 2.0, x / 2.0); }

double comp_sum(std::span<const double> v) {
  double sum = 0.0, c = 0.0;
  for (double x : v) {
    const double t = sum + x;
    if (std::fabs(sum) >= std::fabs(x))
      c += (sum - t) + x;
    else
      c += (x - t) + sum;
    sum = t;
  }
  return sum + c;
}

double shifted_mean(std::span<const double> v) {
  if (v.empty()) throw Error("shifted_mean: empty input");
  const double ref = v[0];
  double sum = 0.0, c = 0.0;
  for (double x : v) {
    const double y = x - ref;
    const double t = sum + y;
    if (std::fabs(sum) >= std::fabs(y))
      c += (sum - t) + y;
    else
      c += (y - t) + sum;
    sum = t;
  }
  return ref + (sum + c) / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
  if (v.size() < 2) throw Error("variance: need at least 2 values");
  const double m = shifted_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw Error("quantile: empty input");
  if (!(p >= 0.0 && p <= 1.0)) throw Error("quantile: p outside [0,1]");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const size_t lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace recbayes::stats

namespace recbayes {

double RngStream::normal() { return stats::norm_quantile(uniform()); }

}  // namespace recbayes
