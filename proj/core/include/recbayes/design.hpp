#pragma once

#include <Eigen/Dense>
#include <array>
#include <span>
#include <string>
#include <vector>

#include "recbayes/stats.hpp"

namespace recbayes::design {

// Fixed covariate order for the yearly/daily/site design row.  Index 0 is the
// intercept; trend1/trend2 are orthonormal polynomials of log(t-1); the lag
// interactions with time use raw log(t-1).
inline constexpr int kNumCovariates = 21;
extern const std::array<const char*, kNumCovariates> kCovariateNames;

// Orthonormal polynomial basis of log-time over the fitting support
// (the distinct values log(t-1), t = 2..T).  Columns have zero mean and unit
// norm over the support and are mutually orthogonal.  Out-of-sample values
// are mapped through the stored monomial-to-orthonormal transform.
class OrthoPolyBasis {
 public:
  OrthoPolyBasis() = default;
  OrthoPolyBasis(int degree, Eigen::MatrixXd rinv, double scale);

  int degree() const { return degree_; }
  // value of the k-th basis column (k = 1..degree) at raw value x
  double eval(int k, double x) const;
  double trend1(double x) const { return eval(1, x); }
  double trend2(double x) const { return eval(2, x); }

  const Eigen::MatrixXd& transform() const { return rinv_; }
  double scale() const { return scale_; }

 private:
  int degree_ = 0;
  Eigen::MatrixXd rinv_;  // (degree+1) x (degree+1), maps monomials
  double scale_ = 1.0;    // column renormalization to unit norm
};

OrthoPolyBasis build_ortho_poly(std::span<const double> support, int degree = 2);

struct Harmonics {
  double s, c;
};
Harmonics day_harmonics(int day);  // sin/cos(2*pi*day/365)

struct RowInputs {
  int t = 2;            // year index, >= 2
  int day = 3;          // day of year
  double lag1 = 0.0;    // indicator at (t, day-1)
  double lag2 = 0.0;    // indicator at (t, day-2)
  double log_dist = 0.0;  // log distance to coast
};

// full 21-entry row, unscaled
void build_design_row(const RowInputs& in, const OrthoPolyBasis& basis,
                      std::span<double, kNumCovariates> out);

// 3-entry row (intercept, trend1, lag) for the day-1/day-2 initial submodels
void build_initial_row(int t, double lag, const OrthoPolyBasis& basis,
                       std::span<double, 3> out);

// Column scaling to zero mean / unit sd fitted on a design matrix; the
// intercept column (flagged) is left untouched.  The same spec must be
// applied at prediction time.
struct ScalingSpec {
  Eigen::VectorXd mean, sd;
  void apply_row(std::span<double> row) const {
    for (int j = 0; j < mean.size(); ++j)
      row[j] = (row[j] - mean[j]) / sd[j];
  }
};

ScalingSpec fit_scaling(const Eigen::MatrixXd& x, bool first_col_intercept);
void apply_scaling(const ScalingSpec& spec, Eigen::Ref<Eigen::MatrixXd> x);

}  // namespace recbayes::design
