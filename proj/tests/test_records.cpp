#include <doctest.h>

#include <cmath>
#include <vector>

#include "recbayes/records.hpp"
#include "recbayes/rng.hpp"

using namespace recbayes;
using records::extract_series;
using records::kMissing;

TEST_CASE("extract_series hand cases") {
  SUBCASE("strictly increasing: every year is a record") {
    std::vector<double> y{1, 2, 3, 4};
    CHECK(extract_series(y) == std::vector<int16_t>{1, 1, 1, 1});
  }
  SUBCASE("strictly decreasing: only the trivial first record") {
    std::vector<double> y{4, 3, 2, 1};
    CHECK(extract_series(y) == std::vector<int16_t>{1, 0, 0, 0});
  }
  SUBCASE("tie chain codes multiplicity") {
    std::vector<double> y{3, 5, 5, 5};
    CHECK(extract_series(y) == std::vector<int16_t>{1, 1, 2, 3});
  }
  SUBCASE("ties below an earlier strict record are not records") {
    std::vector<double> y{5, 9, 5, 5};
    CHECK(extract_series(y) == std::vector<int16_t>{1, 1, 0, 0});
  }
  SUBCASE("a strict break resets the tie chain") {
    std::vector<double> y{2, 2, 4, 4, 7};
    CHECK(extract_series(y) == std::vector<int16_t>{1, 2, 1, 2, 1});
  }
  SUBCASE("missing values never raise the maximum") {
    std::vector<double> y{3, kMissing, 4, kMissing, 2};
    CHECK(extract_series(y) == std::vector<int16_t>{1, 0, 1, 0, 0});
  }
  SUBCASE("missing first year still counts as the trivial record") {
    std::vector<double> y{kMissing, 3, 2};
    CHECK(extract_series(y) == std::vector<int16_t>{1, 1, 0});
  }
}

TEST_CASE("extract_series is invariant to monotone transforms") {
  RngStream rng(31u);
  std::vector<double> y(40);
  for (double& v : y) v = rng.normal();
  const auto base = extract_series(y);
  std::vector<double> z(y.size());
  for (size_t i = 0; i < y.size(); ++i) z[i] = std::exp(2.0 * y[i]) - 5.0;
  CHECK(extract_series(z) == base);
}

TEST_CASE("cumulative counts and stationary expectations") {
  records::TemperaturePanel panel;
  panel.site_ids = {"a"};
  panel.x_km = {0};
  panel.y_km = {0};
  panel.dist_coast_km = {10};
  panel.n_years = 5;
  panel.n_days = 1;
  panel.init_storage();
  const std::vector<double> y{1, 3, 3, 2, 4};
  for (int t = 1; t <= 5; ++t) panel.at(0, t, 1) = y[t - 1];
  const auto tensor = records::extract_records(panel);
  CHECK(tensor.at(0, 1, 1) == 1);
  CHECK(tensor.at(0, 2, 1) == 1);
  CHECK(tensor.at(0, 3, 1) == 2);  // weak record (tie)
  CHECK(tensor.at(0, 4, 1) == 0);
  CHECK(tensor.at(0, 5, 1) == 1);

  const auto excl =
      records::cumulative_records(tensor, 0, 1, records::TieRule::kExclude);
  CHECK(excl == std::vector<double>{1, 2, 2, 2, 3});
  const auto weak = records::cumulative_records(tensor, 0, 1,
                                                records::TieRule::kIncludeWeak);
  CHECK(weak == std::vector<double>{1, 2, 3, 3, 4});

  CHECK(records::crm_probability(4) == doctest::Approx(0.25));
  CHECK(records::expected_stationary_records(1, 4) ==
        doctest::Approx(1 + 0.5 + 1.0 / 3 + 0.25));
  CHECK(records::expected_stationary_records(1, 62) ==
        doctest::Approx(4.712392887832752).epsilon(1e-12));
}

TEST_CASE("record counts are bounded by t") {
  RngStream rng(77u);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> y(30);
    for (double& v : y) v = rng.normal();
    const auto codes = extract_series(y);
    double n = 0;
    for (size_t t = 0; t < codes.size(); ++t) {
      n += codes[t] >= 1 ? 1.0 : 0.0;
      CHECK(n <= static_cast<double>(t + 1));
    }
  }
}

TEST_CASE("masking one value only affects later indicators of that series") {
  RngStream rng(99u);
  std::vector<double> y(25);
  for (double& v : y) v = 0.05 * rng.normal();
  const auto before = extract_series(y);
  std::vector<double> masked = y;
  masked[10] = kMissing;
  const auto after = extract_series(masked);
  for (int t = 0; t < 10; ++t) CHECK(before[t] == after[t]);
}

TEST_CASE("simulate_series is deterministic and drift raises records") {
  records::SeriesModel crm{records::SeriesModel::Kind::kCRM, 0.0, 1.0};
  RngStream a(5u), b(5u);
  const auto y1 = records::simulate_series(crm, 50, a);
  const auto y2 = records::simulate_series(crm, 50, b);
  CHECK(y1 == y2);

  // strong drift: nearly every year should set a record
  records::SeriesModel ldm{records::SeriesModel::Kind::kLDM, 5.0, 0.1};
  RngStream c(5u);
  const auto yd = records::simulate_series(ldm, 50, c);
  const auto codes = extract_series(yd);
  int n = 0;
  for (auto v : codes) n += v >= 1;
  CHECK(n > 45);
}
