#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "recbayes/rng.hpp"
#include "recbayes/stats.hpp"

namespace recbayes::records {

// sentinel for a missing observation; never a record (except the trivial t=1
// entry) and never raises the running maximum
inline constexpr double kMissing = -std::numeric_limits<double>::infinity();

// Daily maximum temperatures on a dense (site, year, day) grid.  Day grid is
// 365 for real data; smaller grids are allowed for synthetic instances.
struct TemperaturePanel {
  std::vector<std::string> site_ids;
  std::vector<double> x_km, y_km, dist_coast_km;
  int n_years = 0;
  int n_days = 365;
  int first_year = 0;  // calendar year of t=1; 0 when synthetic
  std::vector<double> temps;

  int n_sites() const { return static_cast<int>(site_ids.size()); }
  size_t idx(int s, int t, int d) const {
    return (static_cast<size_t>(s) * n_years + (t - 1)) * n_days + (d - 1);
  }
  double& at(int s, int t, int d) { return temps[idx(s, t, d)]; }
  double at(int s, int t, int d) const { return temps[idx(s, t, d)]; }

  void init_storage() {
    temps.assign(static_cast<size_t>(n_sites()) * n_years * n_days, kMissing);
  }
  void validate() const;
};

// Record-indicator codes: 0 = not a record, 1 = record, r >= 2 = weak record
// tied with r-1 preceding weak records at the running maximum.
struct RecordTensor {
  int n_sites = 0, n_years = 0, n_days = 365;
  std::vector<int16_t> ind;

  size_t idx(int s, int t, int d) const {
    return (static_cast<size_t>(s) * n_years + (t - 1)) * n_days + (d - 1);
  }
  int16_t at(int s, int t, int d) const { return ind[idx(s, t, d)]; }
  int16_t& at(int s, int t, int d) { return ind[idx(s, t, d)]; }

  void init_storage() {
    ind.assign(static_cast<size_t>(n_sites) * n_years * n_days, 0);
  }
};

enum class TieRule { kExclude, kIncludeWeak };

inline double indicator_value(int16_t code, TieRule rule) {
  if (code == 1) return 1.0;
  if (code >= 2) return rule == TieRule::kIncludeWeak ? 1.0 : 0.0;
  return 0.0;
}

// Extracts record indicators per (site, day) series across years.  t=1 is a
// trivial record.  Ties against the current running maximum are coded with
// their multiplicity r.
RecordTensor extract_records(const TemperaturePanel& panel);

// Same extraction for a single series (years along the vector).
std::vector<int16_t> extract_series(std::span<const double> y);

// cumulative record counts N_t for one (site, day) series; N_1 = 1
std::vector<double> cumulative_records(const RecordTensor& tensor, int site,
                                       int day, TieRule rule);

double crm_probability(int t);                        // 1/t
double expected_stationary_records(int t1, int t2);   // sum_{t1..t2} 1/t

struct SeriesModel {
  enum class Kind { kCRM, kLDM } kind = Kind::kCRM;
  double c = 0.0;      // linear drift per year (LDM)
  double sigma = 1.0;  // noise sd (LDM)
};

std::vector<double> simulate_series(const SeriesModel& model, int T,
                                    RngStream& rng);

// Synthetic replication of the effect of masking observations: simulates
// n_series independent drift series, re-extracts records after masking a
// fixed set of positions, and summarizes indicator flips and the change in
// the total number of records.
struct MissingImpactConfig {
  int n_series = 40 * 365;
  int T = 62;
  SeriesModel model{SeriesModel::Kind::kLDM, 0.035, 3.56};
  int reps = 200;
  uint64_t seed = 20210608;
  // mask composition (calibrated to an early-years gap pattern)
  int mask_year1 = 46;
  int mask_years_2_6 = 95;
  int mask_total = 649;
};

struct MissingImpactResult {
  double mean_diff = 0, q05_diff = 0, q95_diff = 0;
  double mean_delta = 0, q05_delta = 0, q95_delta = 0;
  std::vector<double> diffs, deltas;
};

MissingImpactResult missing_impact_study(const MissingImpactConfig& cfg);

}  // namespace recbayes::records
