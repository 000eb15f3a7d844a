#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "recbayes/diagnostics.hpp"
#include "recbayes/krige.hpp"
#include "recbayes/mcmc.hpp"
#include "recbayes/records.hpp"

namespace recbayes::io {

// shortest representation that parses back to the identical double
std::string format_double(double v);

// --- dataset ingestion -----------------------------------------------------

struct IngestReport {
  long temperature_rows = 0;
  int dropped_feb29 = 0;
};

// Builds a panel from `site,year,doy,tmax_c` plus `site,x_km,y_km,
// dist_coast_km`.  Blank tmax maps to the missing sentinel.  With
// calendar_doy the doy column counts leap days: Feb 29 rows are dropped and
// later days shift back onto the 365-day grid; otherwise doy must be 1..365.
records::TemperaturePanel read_panel(const std::string& temps_csv,
                                     const std::string& stations_csv,
                                     bool calendar_doy = false,
                                     IngestReport* report = nullptr);

void write_indicators(const records::RecordTensor& tensor,
                      const std::vector<std::string>& site_ids, int first_year,
                      const std::string& path);
records::RecordTensor read_indicators(const std::string& path,
                                      std::vector<std::string>* site_ids = nullptr,
                                      int* first_year = nullptr);

// `cell_id,x_km,y_km,dist_coast_km[,block]`
krige::PredictionGrid read_grid(const std::string& path);

// `group,site` rows; groups ordered by first appearance
diagnostics::CVPlan read_cv_plan(const std::string& path);
void write_cv_plan(const diagnostics::CVPlan& plan, const std::string& path);

// --- posterior draw persistence ---------------------------------------------

// Columnar text files under `dir` (params.csv, w_surfaces.csv,
// w_daily_means.csv, latent files when kept, model_meta.txt).  The round trip
// load(persist(d)) reproduces every number bit-exactly.
void persist_draws(const mcmc::PosteriorDraws& draws, const std::string& dir);
mcmc::PosteriorDraws load_draws(const std::string& dir);

// --- key = value configuration ----------------------------------------------

class KvConfig {
 public:
  static KvConfig parse_file(const std::string& path);
  static KvConfig parse_string(const std::string& text,
                               const std::string& origin = "<config>");

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get_str(const std::string& key, const std::string& def) const;
  long get_int(const std::string& key, long def) const;
  double get_double(const std::string& key, double def) const;
  bool get_bool(const std::string& key, bool def) const;
  uint64_t get_u64(const std::string& key, uint64_t def) const;
  void set(const std::string& key, const std::string& value);
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// maps config keys onto a ModelSpec, rejecting unknown keys
mcmc::ModelSpec spec_from_config(const KvConfig& cfg);

// --- run manifest -----------------------------------------------------------

uint64_t fnv1a64_file(const std::string& path);
std::string library_version();

class RunManifest {
 public:
  void set(const std::string& key, const std::string& value);
  void set_file_hash(const std::string& key, const std::string& path);
  void write(const std::string& path) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// one-call CSV writer used by the CLI emitters
void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::string>& rows);

}  // namespace recbayes::io
