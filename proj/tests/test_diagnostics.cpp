#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "recbayes/diagnostics.hpp"
#include "recbayes/records.hpp"
#include "recbayes/rng.hpp"
#include "recbayes/stats.hpp"
#include "support/synth.hpp"

using namespace recbayes;

TEST_CASE("brier score hand cases") {
  CHECK(diagnostics::brier({1.0, 0.0}, {1, 0}) == doctest::Approx(0.0));
  CHECK(diagnostics::brier({0.5, 0.5}, {1, 0}) == doctest::Approx(0.25));
  CHECK(diagnostics::brier({0.8, 0.2}, {1, 0}) == doctest::Approx(0.04));
  CHECK(diagnostics::brier({0.3}, {1}) == doctest::Approx(0.49));
  CHECK_THROWS_AS(diagnostics::brier({0.5}, {1, 0}), recbayes::Error);
  CHECK_THROWS_AS(diagnostics::brier({}, {}), recbayes::Error);
}

TEST_CASE("auc equals brute-force pair counting") {
  RngStream rng(314u);
  for (int rep = 0; rep < 1000; ++rep) {
    const int n = 2 + static_cast<int>(rng.uniform() * 18);
    std::vector<double> s(n);
    std::vector<int> y(n);
    bool has0 = false, has1 = false;
    for (int i = 0; i < n; ++i) {
      // coarse grid scores force plenty of ties
      s[i] = std::floor(rng.uniform() * 5) / 4.0;
      y[i] = rng.uniform() < 0.5 ? 1 : 0;
      (y[i] ? has1 : has0) = true;
    }
    if (!has0 || !has1) continue;
    double num = 0;
    long pairs = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (y[i] == 1 && y[j] == 0) {
          ++pairs;
          if (s[i] > s[j]) num += 1.0;
          else if (s[i] == s[j]) num += 0.5;
        }
    // midrank arithmetic is dyadic here: the match is exact
    CHECK(diagnostics::auc(s, y) == num / pairs);
  }
  CHECK_THROWS_AS(diagnostics::auc({0.5, 0.7}, {1, 1}), recbayes::Error);
}

TEST_CASE("dic: two-draw hand computation") {
  Eigen::MatrixXd probs(2, 2);
  probs << 0.8, 0.3, 0.6, 0.1;
  const std::vector<int> y{1, 0};
  auto dev = [](double p, int out) {
    return -2.0 * (out ? std::log(p) : std::log1p(-p));
  };
  const double d1 = dev(0.8, 1) + dev(0.3, 0);
  const double d2 = dev(0.6, 1) + dev(0.1, 0);
  const double d_hat = 0.5 * (d1 + d2);
  const double d_at_mean = dev(0.7, 1) + dev(0.2, 0);
  const auto r = diagnostics::dic(probs, y);
  CHECK(r.d_hat == doctest::Approx(d_hat).epsilon(1e-12));
  CHECK(r.p_d == doctest::Approx(d_hat - d_at_mean).epsilon(1e-12));
  CHECK(r.dic == doctest::Approx(d_hat + r.p_d).epsilon(1e-12));
}

TEST_CASE("dic: identical draws give exactly zero p_d") {
  Eigen::MatrixXd probs(50, 3);
  for (int i = 0; i < 50; ++i) {
    probs(i, 0) = 1.0 / 3.0;
    probs(i, 1) = 0.123456789;
    probs(i, 2) = 0.9;
  }
  const auto r = diagnostics::dic(probs, {1, 0, 1});
  CHECK(r.p_d == 0.0);  // bitwise zero, not approximately
}

TEST_CASE("pit accumulator: degenerate cdf sections") {
  diagnostics::PITAccumulator acc;
  // P(X < x) = 0, P(X <= x) = 1: the PIT is uniform -> 0.1 per bin
  acc.add(0.0, 1.0);
  auto m = acc.masses();
  REQUIRE(m.size() == 10);
  for (double v : m) CHECK(v == doctest::Approx(0.1).epsilon(1e-12));

  // a point mass at the top: everything lands in the last bin
  diagnostics::PITAccumulator top;
  top.add(0.95, 0.97);
  m = top.masses();
  for (int j = 0; j < 9; ++j) CHECK(m[j] == doctest::Approx(0.0));
  CHECK(m[9] == doctest::Approx(1.0));

  // degenerate jump (p_below == p_at) lands in one bin
  diagnostics::PITAccumulator jump;
  jump.add(0.42, 0.42);
  m = jump.masses();
  CHECK(m[4] == doctest::Approx(1.0));

  // masses always sum to one
  diagnostics::PITAccumulator mix;
  RngStream rng(5u);
  for (int i = 0; i < 200; ++i) {
    const double a = rng.uniform(), b = rng.uniform();
    mix.add(std::min(a, b), std::max(a, b));
  }
  m = mix.masses();
  CHECK(stats::comp_sum(m) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mix.count() == 200);
}

TEST_CASE("pit steps from an empirical predictive sample") {
  const std::vector<double> draws{1, 2, 2, 3, 5};
  auto [below, at] = diagnostics::pit_steps_from_draws(draws, 2.0);
  CHECK(below == doctest::Approx(0.2));
  CHECK(at == doctest::Approx(0.6));
  std::tie(below, at) = diagnostics::pit_steps_from_draws(draws, 4.0);
  CHECK(below == doctest::Approx(0.8));
  CHECK(at == doctest::Approx(0.8));
  // order of the draw vector cannot matter
  std::vector<double> shuffled{5, 2, 3, 2, 1};
  auto [b2, a2] = diagnostics::pit_steps_from_draws(shuffled, 2.0);
  CHECK(b2 == doctest::Approx(0.2));
  CHECK(a2 == doctest::Approx(0.6));
}

TEST_CASE("ad metric hand cases") {
  Eigen::MatrixXd n_obs(3, 2);
  n_obs << 1, 1, 2, 1, 2, 2;
  SUBCASE("identical predictions give zero") {
    const std::vector<Eigen::MatrixXd> pred{n_obs, n_obs};
    const auto d = diagnostics::ad_metric(n_obs, pred);
    REQUIRE(d.size() == 3);
    for (double v : d) CHECK(v == 0.0);
  }
  SUBCASE("uniform off-by-one gives one") {
    Eigen::MatrixXd shifted = n_obs.array() + 1.0;
    const std::vector<Eigen::MatrixXd> pred{shifted};
    const auto d = diagnostics::ad_metric(n_obs, pred);
    for (double v : d) CHECK(v == doctest::Approx(1.0));
  }
  SUBCASE("recount oracle") {
    Eigen::MatrixXd p1 = n_obs, p2 = n_obs;
    p1(0, 0) = 3;   // |1-3| = 2 in year 0
    p2(2, 1) = 0;   // |2-0| = 2 in year 2
    const std::vector<Eigen::MatrixXd> pred{p1, p2};
    const auto d = diagnostics::ad_metric(n_obs, pred);
    CHECK(d[0] == doctest::Approx(2.0 / 4));  // 2 draws x 2 columns
    CHECK(d[1] == doctest::Approx(0.0));
    CHECK(d[2] == doctest::Approx(2.0 / 4));
  }
}

TEST_CASE("psrf: well-mixed chains near one, split chains catch drift") {
  RngStream rng(909u);
  const int n = 10000;
  std::vector<Eigen::VectorXd> chains;
  for (int c = 0; c < 2; ++c) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.normal();
    chains.push_back(v);
  }
  const double r = diagnostics::psrf(chains);
  CHECK(r < 1.05);
  CHECK(r >= 1.0 - 1e-3);

  // chains with disjoint means blow up
  std::vector<Eigen::VectorXd> bad = chains;
  bad[1].array() += 10.0;
  CHECK(diagnostics::psrf(bad) > 3.0);

  // a single trending chain is caught by splitting
  Eigen::VectorXd trend(n);
  for (int i = 0; i < n; ++i) trend(i) = i < n / 2 ? rng.normal() : 8.0 + rng.normal();
  CHECK(diagnostics::psrf({trend}) > 3.0);

  // constant chains have zero within-variance: refuse
  Eigen::VectorXd flat = Eigen::VectorXd::Constant(n, 2.0);
  CHECK_THROWS_AS(diagnostics::psrf({flat, flat}), recbayes::Error);

  // affine invariance
  std::vector<Eigen::VectorXd> scaled = chains;
  for (auto& v : scaled) v = 5.0 * v.array() - 3.0;
  CHECK(diagnostics::psrf(scaled) == doctest::Approx(r).epsilon(1e-10));
}

TEST_CASE("multivariate psrf") {
  RngStream rng(808u);
  const int n = 8000;
  std::vector<Eigen::MatrixXd> chains;
  for (int c = 0; c < 2; ++c) {
    Eigen::MatrixXd m(n, 3);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 3; ++j) m(i, j) = rng.normal();
    chains.push_back(m);
  }
  CHECK(diagnostics::psrf_multivariate(chains) < 1.05);
  std::vector<Eigen::MatrixXd> bad = chains;
  bad[1].col(2).array() += 8.0;
  CHECK(diagnostics::psrf_multivariate(bad) > 2.0);
}

TEST_CASE("cv plan construction and validation") {
  std::vector<std::string> sites;
  for (int i = 0; i < 23; ++i) sites.push_back("s" + std::to_string(i));
  const auto plan = diagnostics::make_cv_plan(sites, 10, 99u);
  REQUIRE(plan.groups.size() == 10);
  size_t total = 0;
  for (const auto& g : plan.groups) {
    CHECK(g.size() >= 2);
    CHECK(g.size() <= 3);
    total += g.size();
  }
  CHECK(total == 23);
  plan.validate(sites);

  // deterministic in the seed
  const auto plan2 = diagnostics::make_cv_plan(sites, 10, 99u);
  CHECK(plan.groups == plan2.groups);
  const auto plan3 = diagnostics::make_cv_plan(sites, 10, 100u);
  CHECK(plan.groups != plan3.groups);

  // validation failure modes
  auto broken = plan;
  broken.groups[0][0] = "unknown";
  CHECK_THROWS_AS(broken.validate(sites), recbayes::Error);
  auto dup = plan;
  dup.groups[0][0] = dup.groups[1][0];
  CHECK_THROWS_AS(dup.validate(sites), recbayes::Error);
  auto lopsided = plan;
  lopsided.groups[1].push_back(lopsided.groups[0].back());
  lopsided.groups[0].pop_back();
  CHECK_THROWS_AS(lopsided.validate(sites), recbayes::Error);
}

TEST_CASE("cross-validation runs end to end on a small instance") {
  // the harness extracts records from real temperatures itself, so feed it a
  // panel rich enough that every training fold has varying lag columns
  const auto panel = testsupport::noise_panel(6, 10, 10, 2026u);
  mcmc::ModelSpec spec;
  spec.variant = mcmc::Variant::kM1;
  spec.iterations = 40;
  spec.target_draws = 10;
  spec.chains = 1;
  spec.seed = 7u;
  const auto plan = diagnostics::make_cv_plan(panel.site_ids, 3, 5u);
  const std::vector<diagnostics::CrossvalPeriod> periods{
      {"early", 2, 5}, {"late", 6, 10}};
  const auto res = diagnostics::run_crossval(spec, panel, plan, periods, 2);
  CHECK(res.errors.empty());
  REQUIRE(res.folds.size() == 3 * 2);
  for (const auto& f : res.folds) {
    CHECK(f.bs >= 0.0);
    CHECK(f.bs <= 1.0);
    CHECK(f.n > 0);
    if (f.auc_valid) {
      CHECK(f.auc >= 0.0);
      CHECK(f.auc <= 1.0);
    }
  }
  REQUIRE(res.summary.size() == 2);
  for (const auto& s : res.summary) {
    CHECK(s.n > 0);
    CHECK(s.bs >= 0.0);
  }
  // pooled n equals the sum over folds of the same period
  for (const auto& s : res.summary) {
    long n = 0;
    for (const auto& f : res.folds)
      if (f.period == s.period) n += f.n;
    CHECK(s.n == n);
  }

  // deterministic: same spec and plan give identical fold scores
  const auto res2 = diagnostics::run_crossval(spec, panel, plan, periods, 1);
  REQUIRE(res2.folds.size() == res.folds.size());
  for (size_t i = 0; i < res.folds.size(); ++i) {
    CHECK(res.folds[i].bs == res2.folds[i].bs);
    CHECK(res.folds[i].n == res2.folds[i].n);
  }
}
