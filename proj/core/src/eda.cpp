#include "recbayes/eda.hpp"

#include <cmath>

#include "recbayes/stats.hpp"

namespace recbayes::eda {

using records::indicator_value;
using records::RecordTensor;
using records::TieRule;

namespace {

// indicator at (s, t, day - back) with the year-boundary lag convention
double lagged(const RecordTensor& tensor, TieRule rule, int s, int t, int day,
              int back) {
  int d = day - back, tt = t;
  if (d < 1) {
    tt = t - 1;
    d += tensor.n_days;
  }
  return indicator_value(tensor.at(s, tt, d), rule);
}

}  // namespace

std::vector<double> empirical_p_hat(const RecordTensor& tensor, TieRule rule) {
  std::vector<double> out;
  out.reserve(tensor.n_years - 1);
  const double cells = static_cast<double>(tensor.n_sites) * tensor.n_days;
  for (int t = 2; t <= tensor.n_years; ++t) {
    double acc = 0.0;
    for (int s = 0; s < tensor.n_sites; ++s)
      for (int d = 1; d <= tensor.n_days; ++d)
        acc += indicator_value(tensor.at(s, t, d), rule);
    out.push_back(acc / cells);
  }
  return out;
}

Table2x2 persistence_table(const RecordTensor& tensor, int t, TieRule rule) {
  if (t < 2 || t > tensor.n_years) throw Error("persistence_table: t outside 2..T");
  Table2x2 tab;
  for (int s = 0; s < tensor.n_sites; ++s)
    for (int d = 1; d <= tensor.n_days; ++d) {
      const int j = indicator_value(tensor.at(s, t, d), rule) > 0.5;
      const int k = lagged(tensor, rule, s, t, d, 1) > 0.5;
      tab.n[j][k] += 1.0;
    }
  return tab;
}

Table2x2x2 persistence_table3(const RecordTensor& tensor, int t, TieRule rule) {
  if (t < 2 || t > tensor.n_years) throw Error("persistence_table3: t outside 2..T");
  Table2x2x2 tab;
  for (int s = 0; s < tensor.n_sites; ++s)
    for (int d = 1; d <= tensor.n_days; ++d) {
      const int j = indicator_value(tensor.at(s, t, d), rule) > 0.5;
      const int k = lagged(tensor, rule, s, t, d, 1) > 0.5;
      const int v = lagged(tensor, rule, s, t, d, 2) > 0.5;
      tab.n[j][k][v] += 1.0;
    }
  return tab;
}

double log_odds_ratio(const Table2x2& tab) {
  return std::log((tab.n[1][1] + 0.5) * (tab.n[0][0] + 0.5)) -
         std::log((tab.n[0][1] + 0.5) * (tab.n[1][0] + 0.5));
}

std::pair<double, double> second_order_lors(const Table2x2x2& tab) {
  // n[j][k][v]: j = current, k = first lag, v = second lag
  const double lor_v1 = std::log((tab.n[0][0][1] + 0.5) * (tab.n[1][1][1] + 0.5)) -
                        std::log((tab.n[1][0][1] + 0.5) * (tab.n[0][1][1] + 0.5));
  const double lor_v0 = std::log((tab.n[0][0][0] + 0.5) * (tab.n[1][1][0] + 0.5)) -
                        std::log((tab.n[1][0][0] + 0.5) * (tab.n[0][1][0] + 0.5));
  return {lor_v1, lor_v0};
}

namespace {

double bernoulli_loglik(const Eigen::VectorXd& eta, const Eigen::VectorXd& y) {
  double ll = 0.0;
  for (int i = 0; i < y.size(); ++i)
    ll += y[i] * eta[i] - stats::log1pexp(eta[i]);
  return ll;
}

}  // namespace

LogitFit fit_logit_mle(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& offset) {
  const auto n = y.size();
  if (x.rows() != n || offset.size() != n)
    throw Error("fit_logit_mle: dimension mismatch");
  for (int i = 0; i < n; ++i)
    if (y[i] != 0.0 && y[i] != 1.0)
      throw Error("fit_logit_mle: responses must be 0/1");
  const int p = static_cast<int>(x.cols());

  LogitFit fit;
  fit.dof = p;
  fit.beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = offset;
  double ll = bernoulli_loglik(eta, y);
  if (p == 0) {
    fit.loglik = ll;
    fit.aic = -2.0 * ll;
    fit.converged = true;
    return fit;
  }

  constexpr int kMaxIter = 50;
  constexpr double kTol = 1e-10;
  for (int it = 1; it <= kMaxIter; ++it) {
    fit.iterations = it;
    Eigen::VectorXd p_hat(n), w(n);
    for (int i = 0; i < n; ++i) {
      p_hat[i] = stats::inv_logit(eta[i]);
      w[i] = std::max(p_hat[i] * (1.0 - p_hat[i]), 1e-12);
    }
    const Eigen::MatrixXd xtwx =
        x.transpose() * w.asDiagonal() * x;
    const Eigen::VectorXd score = x.transpose() * (y - p_hat);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xtwx);
    if (ldlt.info() != Eigen::Success)
      throw Error("fit_logit_mle: singular information matrix");
    Eigen::VectorXd step = ldlt.solve(score);

    // step halving on the log-likelihood
    double new_ll = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd beta_new;
    for (int h = 0; h < 30; ++h) {
      beta_new = fit.beta + step;
      eta = offset + x * beta_new;
      new_ll = bernoulli_loglik(eta, y);
      if (new_ll >= ll - 1e-12) break;
      step *= 0.5;
    }
    const double rel = std::fabs(new_ll - ll) / (std::fabs(new_ll) + 0.1);
    fit.beta = beta_new;
    ll = new_ll;
    if (rel < kTol) {
      fit.converged = true;
      break;
    }
  }
  eta = offset + x * fit.beta;
  fit.loglik = bernoulli_loglik(eta, y);
  fit.aic = -2.0 * fit.loglik + 2.0 * fit.dof;
  fit.separation = fit.beta.array().abs().maxCoeff() > 30.0;
  return fit;
}

}  // namespace recbayes::eda
