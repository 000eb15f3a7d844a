#include "recbayes/records.hpp"

#include <cmath>
#include <cstdio>
#include <span>

namespace recbayes::records {

void TemperaturePanel::validate() const {
  if (n_years < 2) throw Error("panel: need at least 2 years");
  if (n_days < 1 || n_days > 365) throw Error("panel: n_days outside 1..365");
  if (site_ids.empty()) throw Error("panel: no sites");
  if (x_km.size() != site_ids.size() || y_km.size() != site_ids.size() ||
      dist_coast_km.size() != site_ids.size())
    throw Error("panel: station metadata size mismatch");
  if (temps.size() != static_cast<size_t>(n_sites()) * n_years * n_days)
    throw Error("panel: storage size mismatch");
  for (double d : dist_coast_km)
    if (!(d > 0.0)) throw Error("panel: dist_coast_km must be positive");
  for (double v : temps)
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw Error("panel: temperatures must be finite or the missing sentinel");
}

std::vector<int16_t> extract_series(std::span<const double> y) {
  std::vector<int16_t> out(y.size(), 0);
  if (y.empty()) return out;
  for (double v : y)
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw Error("extract_records: value neither finite nor missing");
  out[0] = 1;  // trivial record
  double running_max = y[0];
  int tie_chain = 1;  // weak records currently at running_max
  for (size_t t = 1; t < y.size(); ++t) {
    const double v = y[t];
    if (v == kMissing) continue;  // never a record, never raises the max
    if (v > running_max) {
      out[t] = 1;
      running_max = v;
      tie_chain = 1;
    } else if (v == running_max) {
      ++tie_chain;
      out[t] = static_cast<int16_t>(tie_chain);
    }
  }
  return out;
}

RecordTensor extract_records(const TemperaturePanel& panel) {
  panel.validate();
  RecordTensor out;
  out.n_sites = panel.n_sites();
  out.n_years = panel.n_years;
  out.n_days = panel.n_days;
  out.init_storage();
  std::vector<double> series(panel.n_years);
  for (int s = 0; s < out.n_sites; ++s) {
    for (int d = 1; d <= out.n_days; ++d) {
      for (int t = 1; t <= out.n_years; ++t) series[t - 1] = panel.at(s, t, d);
      const auto codes = extract_series(series);
      for (int t = 1; t <= out.n_years; ++t) out.at(s, t, d) = codes[t - 1];
    }
  }
  return out;
}

std::vector<double> cumulative_records(const RecordTensor& tensor, int site,
                                       int day, TieRule rule) {
  std::vector<double> out(tensor.n_years, 0.0);
  double acc = 0.0;
  for (int t = 1; t <= tensor.n_years; ++t) {
    acc += indicator_value(tensor.at(site, t, day), rule);
    out[t - 1] = acc;
  }
  return out;
}

double crm_probability(int t) {
  if (t < 1) throw Error("crm_probability: t must be >= 1");
  return 1.0 / static_cast<double>(t);
}

double expected_stationary_records(int t1, int t2) {
  if (t1 < 1 || t2 < t1) throw Error("expected_stationary_records: bad range");
  double s = 0.0;
  for (int t = t2; t >= t1; --t) s += 1.0 / static_cast<double>(t);
  return s;
}

std::vector<double> simulate_series(const SeriesModel& model, int T,
                                    RngStream& rng) {
  if (T < 1) throw Error("simulate_series: T must be >= 1");
  std::vector<double> y(T);
  for (int t = 1; t <= T; ++t) {
    double v = rng.normal();
    if (model.kind == SeriesModel::Kind::kLDM)
      v = model.c * t + model.sigma * v;
    y[t - 1] = v;
  }
  return y;
}

namespace {

struct MaskCell {
  int t;      // 1-based year
  int series; // series index
};

std::vector<MaskCell> build_mask(const MissingImpactConfig& cfg, RngStream& rng) {
  if (cfg.mask_year1 + cfg.mask_years_2_6 > cfg.mask_total)
    throw Error("missing_impact_study: mask composition exceeds total");
  std::vector<MaskCell> mask;
  mask.reserve(cfg.mask_total);
  for (int i = 0; i < cfg.mask_year1; ++i)
    mask.push_back({1, static_cast<int>(rng.uniform_below(cfg.n_series))});
  for (int i = 0; i < cfg.mask_years_2_6; ++i)
    mask.push_back({2 + static_cast<int>(rng.uniform_below(5)),
                    static_cast<int>(rng.uniform_below(cfg.n_series))});
  const int rest = cfg.mask_total - cfg.mask_year1 - cfg.mask_years_2_6;
  for (int i = 0; i < rest; ++i)
    mask.push_back({1 + static_cast<int>(rng.uniform_below(cfg.T)),
                    static_cast<int>(rng.uniform_below(cfg.n_series))});
  return mask;
}

}  // namespace

MissingImpactResult missing_impact_study(const MissingImpactConfig& cfg) {
  RngStream root(cfg.seed);
  RngStream mask_rng = root.fork(0xa5);
  const auto mask = build_mask(cfg, mask_rng);

  MissingImpactResult res;
  res.diffs.reserve(cfg.reps);
  res.deltas.reserve(cfg.reps);
  std::vector<double> y(cfg.T), ym(cfg.T);
  for (int rep = 0; rep < cfg.reps; ++rep) {
    RngStream rep_rng = root.fork(1000 + rep);
    // per-series tallies; mask positions grouped by series
    std::vector<std::vector<int>> masked_years(cfg.n_series);
    for (const auto& m : mask) masked_years[m.series].push_back(m.t);
    long diff = 0, records_masked = 0, records_full = 0;
    for (int s = 0; s < cfg.n_series; ++s) {
      RngStream srng = rep_rng.fork(s);
      for (int t = 1; t <= cfg.T; ++t) {
        double v = srng.normal();
        v = cfg.model.c * t + cfg.model.sigma * v;
        y[t - 1] = v;
        ym[t - 1] = v;
      }
      for (int t : masked_years[s]) ym[t - 1] = kMissing;
      const auto i0 = extract_series(y);
      if (masked_years[s].empty()) {
        for (int t = 0; t < cfg.T; ++t) {
          records_full += i0[t] == 1;
          records_masked += i0[t] == 1;
        }
        continue;
      }
      const auto i1 = extract_series(ym);
      for (int t = 0; t < cfg.T; ++t) {
        // continuous simulations cannot tie; codes are 0/1
        diff += i0[t] != i1[t];
        records_full += i0[t] == 1;
        records_masked += i1[t] == 1;
      }
    }
    res.diffs.push_back(static_cast<double>(diff));
    res.deltas.push_back(static_cast<double>(records_masked - records_full));
  }
  res.mean_diff = stats::shifted_mean(res.diffs);
  res.mean_delta = stats::shifted_mean(res.deltas);
  res.q05_diff = stats::quantile(res.diffs, 0.05);
  res.q95_diff = stats::quantile(res.diffs, 0.95);
  res.q05_delta = stats::quantile(res.deltas, 0.05);
  res.q95_delta = stats::quantile(res.deltas, 0.95);
  return res;
}

}  // namespace recbayes::records
