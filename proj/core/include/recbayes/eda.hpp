#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "recbayes/records.hpp"

namespace recbayes::eda {

// mean record indicator per year over all sites and days (t = 2..T entries)
std::vector<double> empirical_p_hat(const records::RecordTensor& tensor,
                                    records::TieRule rule = records::TieRule::kExclude);

// counts n[j][k] of (I_{t,l} = j, I_{t,l-1} = k) over sites and days 1..365,
// with the year-boundary convention I_{t,0} = I_{t-1,365}
struct Table2x2 {
  double n[2][2] = {{0, 0}, {0, 0}};
};
// counts n[j][k][v] adding the second-order lag I_{t,l-2}
struct Table2x2x2 {
  double n[2][2][2] = {{{0, 0}, {0, 0}}, {{0, 0}, {0, 0}}};
};

Table2x2 persistence_table(const records::RecordTensor& tensor, int t,
                           records::TieRule rule = records::TieRule::kExclude);
Table2x2x2 persistence_table3(const records::RecordTensor& tensor, int t,
                              records::TieRule rule = records::TieRule::kExclude);

// log odds ratio with the +0.5 continuity correction
double log_odds_ratio(const Table2x2& tab);
// second-order LORs conditional on the second lag being 1 resp. 0
std::pair<double, double> second_order_lors(const Table2x2x2& tab);

struct LogitFit {
  Eigen::VectorXd beta;
  double loglik = 0.0;
  int dof = 0;
  double aic = 0.0;
  bool converged = false;
  bool separation = false;
  int iterations = 0;
};

// Bernoulli GLM by iteratively reweighted least squares with an offset and
// step halving; zero-column designs fit the offset-only model.
LogitFit fit_logit_mle(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& offset);

}  // namespace recbayes::eda
