#include "recbayes/design.hpp"

#include <cmath>

namespace recbayes::design {

const std::array<const char*, kNumCovariates> kCovariateNames = {
    "intercept",      "trend1",          "trend2",
    "lag1",           "lag2",            "lag1:lag2",
    "logt:lag1",      "logt:lag2",       "logt:lag1:lag2",
    "sin",            "cos",             "sin:trend1",
    "cos:trend1",     "sin:trend2",      "cos:trend2",
    "logdist",        "logdist:trend1",  "logdist:trend2",
    "logdist:lag1",   "logdist:lag2",    "logdist:lag1:lag2"};

OrthoPolyBasis::OrthoPolyBasis(int degree, Eigen::MatrixXd rinv, double scale)
    : degree_(degree), rinv_(std::move(rinv)), scale_(scale) {}

double OrthoPolyBasis::eval(int k, double x) const {
  if (k < 1 || k > degree_) throw Error("OrthoPolyBasis: column out of range");
  double acc = 0.0, pw = 1.0;
  for (int i = 0; i <= degree_; ++i) {
    acc += pw * rinv_(i, k);
    pw *= x;
  }
  return acc * scale_;
}

OrthoPolyBasis build_ortho_poly(std::span<const double> support, int degree) {
  const int m = static_cast<int>(support.size());
  if (degree < 1 || degree > 3) throw Error("build_ortho_poly: degree must be 1..3");
  if (m < degree + 1) throw Error("build_ortho_poly: support smaller than degree+1");
  Eigen::MatrixXd v(m, degree + 1);
  for (int i = 0; i < m; ++i) {
    double pw = 1.0;
    for (int j = 0; j <= degree; ++j) {
      v(i, j) = pw;
      pw *= support[i];
    }
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(v);
  Eigen::MatrixXd r = qr.matrixQR().topRows(degree + 1).triangularView<Eigen::Upper>();
  // fix signs so the leading monomial coefficient of each column is positive
  for (int j = 0; j <= degree; ++j)
    if (r(j, j) < 0) r.row(j) *= -1.0;
  Eigen::MatrixXd rinv = r.inverse();
  OrthoPolyBasis basis(degree, std::move(rinv), 1.0);

  // orthonormality sanity check over the support
  for (int a = 1; a <= degree; ++a) {
    double mean = 0.0, norm = 0.0;
    for (double x : support) {
      const double e = basis.eval(a, x);
      mean += e;
      norm += e * e;
    }
    if (std::fabs(mean) > 1e-9 * m || std::fabs(norm - 1.0) > 1e-9)
      throw Error("build_ortho_poly: basis failed orthonormality check");
  }
  return basis;
}

Harmonics day_harmonics(int day) {
  const double w = 2.0 * M_PI * static_cast<double>(day) / 365.0;
  return {std::sin(w), std::cos(w)};
}

void build_design_row(const RowInputs& in, const OrthoPolyBasis& basis,
                      std::span<double, kNumCovariates> out) {
  if (in.t < 2) throw Error("build_design_row: t must be >= 2");
  const double logt = std::log(static_cast<double>(in.t - 1));
  const double tr1 = basis.trend1(logt);
  const double tr2 = basis.trend2(logt);
  const auto [s, c] = day_harmonics(in.day);
  const double l1 = in.lag1, l2 = in.lag2, l12 = in.lag1 * in.lag2;
  const double ld = in.log_dist;
  out[0] = 1.0;
  out[1] = tr1;
  out[2] = tr2;
  out[3] = l1;
  out[4] = l2;
  out[5] = l12;
  out[6] = logt * l1;
  out[7] = logt * l2;
  out[8] = logt * l12;
  out[9] = s;
  out[10] = c;
  out[11] = s * tr1;
  out[12] = c * tr1;
  out[13] = s * tr2;
  out[14] = c * tr2;
  out[15] = ld;
  out[16] = ld * tr1;
  out[17] = ld * tr2;
  out[18] = ld * l1;
  out[19] = ld * l2;
  out[20] = ld * l12;
}

void build_initial_row(int t, double lag, const OrthoPolyBasis& basis,
                       std::span<double, 3> out) {
  if (t < 2) throw Error("build_initial_row: t must be >= 2");
  const double logt = std::log(static_cast<double>(t - 1));
  out[0] = 1.0;
  out[1] = basis.trend1(logt);
  out[2] = lag;
}

ScalingSpec fit_scaling(const Eigen::MatrixXd& x, bool first_col_intercept) {
  const int p = static_cast<int>(x.cols());
  const auto n = static_cast<double>(x.rows());
  if (x.rows() < 2) throw Error("fit_scaling: need at least 2 rows");
  ScalingSpec spec;
  spec.mean = Eigen::VectorXd::Zero(p);
  spec.sd = Eigen::VectorXd::Ones(p);
  for (int j = 0; j < p; ++j) {
    if (j == 0 && first_col_intercept) continue;
    const double m = x.col(j).mean();
    const double ss = (x.col(j).array() - m).square().sum();
    const double sd = std::sqrt(ss / (n - 1.0));
    if (sd <= 0.0)
      throw Error("fit_scaling: constant column '" + std::to_string(j) + "'");
    spec.mean[j] = m;
    spec.sd[j] = sd;
  }
  return spec;
}

void apply_scaling(const ScalingSpec& spec, Eigen::Ref<Eigen::MatrixXd> x) {
  if (x.cols() != spec.mean.size()) throw Error("apply_scaling: column mismatch");
  for (int j = 0; j < x.cols(); ++j)
    x.col(j) = (x.col(j).array() - spec.mean[j]) / spec.sd[j];
}

}  // namespace recbayes::design
