#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace recbayes {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace stats {

double norm_cdf(double x);
double norm_sf(double x);          // 1 - cdf, accurate in the upper tail
double norm_quantile(double p);    // inverse cdf

double log1pexp(double x);         // log(1 + e^x), overflow-safe
double inv_logit(double x);        // 1 / (1 + e^-x)
double logit(double p);

double logistic_cdf(double x);     // standard logistic

// regularized incomplete gamma P(a,x) and complement Q(a,x)
double gamma_p(double a, double x);
double gamma_q(double a, double x);
// solves P(a,x) = p for x
double gamma_quantile(double a, double p);

// cdf of the asymptotic Kolmogorov-Smirnov distribution
double ks_cdf(double x);

double chi2_sf(double x, double dof);

// Neumaier-compensated sum; order-deterministic
double comp_sum(std::span<const double> v);
// mean computed as v[0] + mean(v - v[0]); exact when all elements are equal
double shifted_mean(std::span<const double> v);
double variance(std::span<const double> v);  // unbiased, via shifted mean

// type-7 (linear interpolation) quantile of unsorted data
double quantile(std::vector<double> v, double p);

// two-sided Kolmogorov-Smirnov test of a sample against an analytic cdf;
// returns the statistic; the asymptotic p-value is 1 - ks_cdf(sqrt(n) D)
template <class Cdf>
double ks_statistic(std::vector<double> sample, Cdf&& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max(d, std::max(f - static_cast<double>(i) / n,
                             static_cast<double>(i + 1) / n - f));
  }
  return d;
}

}  // namespace stats
}  // namespace recbayes
