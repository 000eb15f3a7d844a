#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "recbayes/krige.hpp"
#include "recbayes/mcmc.hpp"
#include "recbayes/records.hpp"
#include "recbayes/rng.hpp"
#include "recbayes/stats.hpp"
#include "support/synth.hpp"

using namespace recbayes;
using testsupport::noise_panel;

namespace {

krige::PredictionGrid grid_from_panel(const records::TemperaturePanel& panel) {
  krige::PredictionGrid grid;
  grid.cell_ids = panel.site_ids;
  grid.x_km = panel.x_km;
  grid.y_km = panel.y_km;
  grid.dist_coast_km = panel.dist_coast_km;
  return grid;
}

mcmc::PosteriorDraws quick_fit(mcmc::Variant v,
                               const records::TemperaturePanel& panel,
                               const records::RecordTensor& obs,
                               int iterations, uint64_t seed) {
  mcmc::ModelSpec spec;
  spec.variant = v;
  spec.iterations = iterations;
  spec.target_draws = std::max(1, iterations / 2);
  spec.chains = 1;
  spec.seed = seed;
  return mcmc::run_chain(spec, panel, obs);
}

mcmc::PosteriorDraws quick_fit(mcmc::Variant v,
                               const records::TemperaturePanel& panel,
                               int iterations, uint64_t seed) {
  return quick_fit(v, panel, records::extract_records(panel), iterations,
                   seed);
}

}  // namespace

TEST_CASE("exponential covariance hand values") {
  Eigen::MatrixXd a(2, 2), b(1, 2);
  a << 0, 0, 3, 4;  // distance 5 apart
  b << 0, 0;
  const auto c = krige::exp_covariance(a, b, 2.0, 0.1);
  REQUIRE(c.rows() == 2);
  REQUIRE(c.cols() == 1);
  CHECK(c(0, 0) == doctest::Approx(2.0));
  CHECK(c(1, 0) == doctest::Approx(2.0 * std::exp(-0.5)));
  CHECK_THROWS_AS(krige::exp_covariance(a, b, -1.0, 0.1), recbayes::Error);
}

TEST_CASE("kriging reproduces the conditional-normal mean") {
  // two observed points, one target: hand-computable conditional mean
  Eigen::MatrixXd obs_xy(2, 2), tgt_xy(1, 2);
  obs_xy << 0, 0, 10, 0;
  tgt_xy << 3, 0;
  const double phi = 0.07;
  const auto sys = krige::build_krige_system(obs_xy, tgt_xy, phi);

  Eigen::Matrix2d r_ss;
  r_ss << 1, std::exp(-phi * 10), std::exp(-phi * 10), 1;
  Eigen::Vector2d r_st(std::exp(-phi * 3), std::exp(-phi * 7));
  const Eigen::Vector2d w = r_ss.llt().solve(r_st);
  CHECK(sys.weights(0, 0) == doctest::Approx(w(0)).epsilon(1e-10));
  CHECK(sys.weights(1, 0) == doctest::Approx(w(1)).epsilon(1e-10));
  CHECK(sys.exact_obs[0] == -1);

  // mean of many draws converges to mean + w' (w_obs - mean)
  Eigen::VectorXd w_obs(2);
  w_obs << 1.4, -0.6;
  const double mean = 0.5, sig0sq = 2.0;
  const double expect = mean + w.dot(w_obs - Eigen::Vector2d::Constant(mean));
  RngStream rng(8u);
  double sum = 0;
  const int n = 40000;
  for (int i = 0; i < n; ++i)
    sum += krige::krige_w(rng, sys, w_obs, mean, sig0sq)(0);
  CHECK(sum / n == doctest::Approx(expect).epsilon(0.05));

  // conditional variance: sig0sq * (1 - r_st' R^-1 r_st)
  const double cvar = sig0sq * (1.0 - r_st.dot(w));
  double ss = 0;
  RngStream rng2(9u);
  for (int i = 0; i < n; ++i) {
    const double x = krige::krige_w(rng2, sys, w_obs, mean, sig0sq)(0) - expect;
    ss += x * x;
  }
  CHECK(ss / n == doctest::Approx(cvar).epsilon(0.08));
}

TEST_CASE("targets coinciding with observed sites reproduce them exactly") {
  RngStream rng(12u);
  Eigen::MatrixXd obs_xy(4, 2);
  obs_xy << 0, 0, 100, 0, 0, 100, 100, 100;
  Eigen::MatrixXd tgt_xy(3, 2);
  tgt_xy << 100, 0,   // coincides with obs 1
      50, 50,          // interior point
      0, 100;          // coincides with obs 2
  const auto sys = krige::build_krige_system(obs_xy, tgt_xy, 0.01);
  CHECK(sys.exact_obs[0] == 1);
  CHECK(sys.exact_obs[1] == -1);
  CHECK(sys.exact_obs[2] == 2);

  Eigen::VectorXd w_obs(4);
  w_obs << 0.3, -1.2, 2.5, 0.9;
  for (int rep = 0; rep < 50; ++rep) {
    const auto w = krige::krige_w(rng, sys, w_obs, 0.0, 3.0);
    CHECK(w(0) == w_obs(1));  // exact, not approximate
    CHECK(w(2) == w_obs(2));
    CHECK(std::isfinite(w(1)));
  }
}

TEST_CASE("grid validation") {
  krige::PredictionGrid g;
  CHECK_THROWS_AS(g.validate(), recbayes::Error);
  g.cell_ids = {"a", "b"};
  g.x_km = {0, 1};
  g.y_km = {0, 1};
  g.dist_coast_km = {5, 6};
  g.validate();  // no block labels: fine
  g.block = {"north"};
  CHECK_THROWS_AS(g.validate(), recbayes::Error);  // wrong block size
  g.block = {"north", "south"};
  g.validate();
  CHECK(g.block_cells("north") == std::vector<int>{0});
  CHECK(g.block_cells("") == std::vector<int>{0, 1});
  g.cell_ids = {"a", "a"};
  CHECK_THROWS_AS(g.validate(), recbayes::Error);  // duplicate ids
  g.cell_ids = {"a", "b"};
  g.dist_coast_km = {5, -1};
  CHECK_THROWS_AS(g.validate(), recbayes::Error);  // nonpositive distance
}

TEST_CASE("memoryless variant predicts p = 1/t everywhere") {
  const auto panel = noise_panel(3, 10, 4, 40u);
  const auto draws = quick_fit(mcmc::Variant::kM0, panel, 8, 3u);
  auto grid = grid_from_panel(panel);
  const auto field = krige::simulate_predictive(draws, grid, 10, 99u);
  REQUIRE(field.n_cells == 3);
  REQUIRE(field.T == 10);
  for (int k = 0; k < field.n_draws; ++k)
    for (int t = 1; t <= 10; ++t)
      for (int d = 1; d <= 4; ++d)
        for (int c = 0; c < 3; ++c)
          CHECK(field.prob(k, t, d, c) == 1.0 / t);
  // year 1 indicators are all ones
  for (int c = 0; c < 3; ++c) CHECK(field.indicator(0, 1, 2, c) == 1);
}

TEST_CASE("nbar, ratio, ers on a handcrafted field") {
  krige::PredictiveField f;
  f.n_draws = 2;
  f.T = 3;
  f.n_days = 2;
  f.n_cells = 2;
  f.cell_ids = {"a", "b"};
  f.block = {"x", "y"};
  const size_t total = static_cast<size_t>(2) * 3 * 2 * 2;
  f.p.assign(total, 0.0);
  f.ind.assign(total, 0);
  // fill draw 0: cell 0 records on (t,d) = (2,1), (3,2); cell 1 on (2,2)
  auto set = [&](int k, int t, int d, int c, int v) {
    f.ind[f.idx(k, t, d, c)] = static_cast<int8_t>(v);
  };
  for (int k = 0; k < 2; ++k)
    for (int d = 1; d <= 2; ++d)
      for (int c = 0; c < 2; ++c) set(k, 1, d, c, 1);  // trivial year
  set(0, 2, 1, 0, 1);
  set(0, 3, 2, 0, 1);
  set(0, 2, 2, 1, 1);
  set(1, 3, 1, 0, 1);
  set(1, 2, 2, 1, 1);
  set(1, 3, 2, 1, 1);

  // nbar over t = 2..3, d = 1..2, cell 0: counts / n_days
  const auto nb = krige::nbar(f, 2, 3, 1, 2, 0);
  REQUIRE(nb.size() == 2);
  CHECK(nb[0] == doctest::Approx(2.0 / 2));
  CHECK(nb[1] == doctest::Approx(1.0 / 2));

  const double expected = records::expected_stationary_records(2, 3);
  const auto rt = krige::ratio(f, 2, 3, 1, 2, 0);
  CHECK(rt[0] == doctest::Approx(nb[0] / expected));
  CHECK(rt[1] == doctest::Approx(nb[1] / expected));

  const auto by_cell = krige::nbar_by_cell(f, 2, 3, 1, 2);
  REQUIRE(by_cell.rows() == 2);
  REQUIRE(by_cell.cols() == 2);
  CHECK(by_cell(0, 0) == doctest::Approx(nb[0]));
  CHECK(by_cell(1, 0) == doctest::Approx(nb[1]));
  CHECK(by_cell(0, 1) == doctest::Approx(0.5));  // cell 1, draw 0

  // ers: fraction of cells recording on (t=2, d=2)
  const auto e = krige::ers(f, 2, 2, {0, 1});
  CHECK(e[0] == doctest::Approx(0.5));
  CHECK(e[1] == doctest::Approx(0.5));
  const auto eb = krige::ers_bar(f, 3, {1, 2}, {0, 1});
  CHECK(eb[0] == doctest::Approx((0.0 / 2 + 1.0 / 2) / 2));
  CHECK(eb[1] == doctest::Approx((1.0 / 2 + 1.0 / 2) / 2));
  CHECK_THROWS_AS(krige::ers(f, 2, 1, {}), recbayes::Error);
}

TEST_CASE("area fraction exceeding") {
  Eigen::MatrixXd stat(3, 4);  // 3 draws, 4 cells
  stat << 1.0, 2.0, 0.5, 3.0,
          1.2, 1.8, 0.4, 2.0,
          0.9, 2.2, 0.6, 2.5;
  const auto mean = krige::area_fraction_exceeding(stat, 1.0, krige::ExceedMode::kMean);
  REQUIRE(mean.size() == 1);
  // column means: 31/30, 2, 0.5, 2.5 -> 3 of 4 exceed 1.0
  CHECK(mean[0] == doctest::Approx(0.75));
  const auto q05 = krige::area_fraction_exceeding(stat, 0.3, krige::ExceedMode::kPointwiseQ05);
  REQUIRE(q05.size() == 1);
  CHECK(q05[0] == doctest::Approx(1.0));  // every cell's q05 exceeds 0.3
  const auto per = krige::area_fraction_exceeding(stat, 1.0, krige::ExceedMode::kPerDraw);
  REQUIRE(per.size() == 3);
  CHECK(per[0] == doctest::Approx(0.5));
  CHECK(per[1] == doctest::Approx(0.75));
  CHECK(per[2] == doctest::Approx(0.5));
}

TEST_CASE("dynamic rollout lags feed the linear predictor") {
  // M1 fit with a huge positive lag coefficient would be hard to force; use
  // structural checks instead: dims, year-1 ones, probabilities in (0,1),
  // determinism across thread budgets
  const auto sim = testsupport::simulate_m1(5, 12, 6,
                                            testsupport::default_m1_truth(),
                                            77u);
  mcmc::ModelSpec spec;
  spec.variant = mcmc::Variant::kM1;
  spec.iterations = 40;
  spec.target_draws = 10;
  spec.chains = 2;
  spec.seed = 5u;
  const auto draws = mcmc::run_chain(spec, sim.panel, sim.tensor);
  auto grid = grid_from_panel(sim.panel);
  grid.cell_ids.push_back("offsite");
  grid.x_km.push_back(123.0);
  grid.y_km.push_back(456.0);
  grid.dist_coast_km.push_back(42.0);

  const auto f1 = krige::simulate_predictive(draws, grid, 12, 31u, 1);
  const auto f8 = krige::simulate_predictive(draws, grid, 12, 31u, 8);
  CHECK(f1.p == f8.p);
  CHECK(f1.ind == f8.ind);
  CHECK(f1.n_draws == 20);
  for (int c = 0; c < f1.n_cells; ++c) {
    CHECK(f1.prob(3, 1, 1, c) == 1.0);
    CHECK(f1.indicator(3, 1, 3, c) == 1);
  }
  for (int t = 2; t <= 12; ++t)
    for (int d = 1; d <= 6; ++d) {
      const double p = f1.prob(7, t, d, 5);
      CHECK(p > 0.0);
      CHECK(p < 1.0);
    }
  CHECK_THROWS_AS(krige::simulate_predictive(draws, grid, 13, 1u), recbayes::Error);
}

TEST_CASE("one-step-ahead uses observed lags") {
  // enough sites/years/days that every indicator column varies under this seed
  const auto sim = testsupport::simulate_m1(6, 14, 12,
                                            testsupport::default_m1_truth(),
                                            88u);
  const auto draws = quick_fit(mcmc::Variant::kM1, sim.panel, sim.tensor, 30, 21u);
  auto grid = grid_from_panel(sim.panel);
  const auto f = krige::one_step_ahead(draws, grid, sim.tensor, 17u);
  CHECK(f.n_draws == draws.meta.draws_per_chain);
  CHECK(f.T == 14);
  CHECK(f.n_sites == 6);
  REQUIRE(f.p.size() ==
          static_cast<size_t>(f.n_draws) * 13 * 12 * 6);
  for (double p : f.p) {
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
  // deterministic in the seed
  const auto g = krige::one_step_ahead(draws, grid, sim.tensor, 17u);
  CHECK(f.p == g.p);

  // the memoryless variant has no lag model to evaluate
  const auto m0 = quick_fit(mcmc::Variant::kM0, sim.panel, sim.tensor, 8, 2u);
  CHECK_THROWS_AS(krige::one_step_ahead(m0, grid, sim.tensor, 1u), recbayes::Error);
}
