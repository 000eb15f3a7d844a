#include "recbayes/io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "recbayes/stats.hpp"

namespace fs = std::filesystem;

namespace recbayes::io {

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kDrawFormatVersion = 1;

[[noreturn]] void fail(const std::string& path, long line,
                       const std::string& msg) {
  throw Error(path + " line " + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  for (size_t i = 0; i <= line.size(); ++i)
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  return out;
}

struct CsvFile {
  std::string path;
  std::vector<std::string> header;
  std::vector<std::pair<long, std::vector<std::string>>> rows;
};

CsvFile read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  CsvFile out;
  out.path = path;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv(line);
    if (out.header.empty()) {
      out.header = fields;
      continue;
    }
    if (fields.size() != out.header.size())
      fail(path, line_no, "expected " + std::to_string(out.header.size()) +
                              " fields, got " + std::to_string(fields.size()));
    out.rows.emplace_back(line_no, std::move(fields));
  }
  if (out.header.empty()) throw Error(path + ": empty file");
  return out;
}

void require_header(const CsvFile& f, const std::vector<std::string>& want) {
  if (f.header != want) {
    std::string expect;
    for (const auto& w : want) expect += (expect.empty() ? "" : ",") + w;
    throw Error(f.path + ": header must be `" + expect + "`");
  }
}

double to_double(const std::string& path, long line, const std::string& s,
                 const char* what) {
  const std::string t = trim(s);
  if (t.empty()) fail(path, line, std::string("empty ") + what);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size())
    fail(path, line, std::string("bad ") + what + " `" + t + "`");
  return v;
}

long to_long(const std::string& path, long line, const std::string& s,
             const char* what) {
  const std::string t = trim(s);
  if (t.empty()) fail(path, line, std::string("empty ") + what);
  char* end = nullptr;
  const long v = std::strtol(t.c_str(), &end, 10);
  if (end != t.c_str() + t.size())
    fail(path, line, std::string("bad ") + what + " `" + t + "`");
  return v;
}

bool is_leap(long year) {
  return year % 4 == 0 && (year % 100 != 0 || year % 400 == 0);
}

std::ofstream open_out(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  return out;
}

std::string join_doubles(const double* v, long n) {
  std::string out;
  for (long i = 0; i < n; ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out;
}

std::string join_strings(const std::vector<std::string>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (v[i].find_first_of(",\n") != std::string::npos)
      throw Error("identifier contains a comma or newline: " + v[i]);
    if (i) out += ',';
    out += v[i];
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& path,
                                  const std::string& s) {
  std::vector<double> out;
  if (trim(s).empty()) return out;
  for (const auto& tok : split_csv(s)) out.push_back(to_double(path, 0, tok, "value"));
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    const double back = std::strtod(buf, nullptr);
    if (std::memcmp(&back, &v, sizeof v) == 0) return buf;
  }
  return buf;
}

records::TemperaturePanel read_panel(const std::string& temps_csv,
                                     const std::string& stations_csv,
                                     bool calendar_doy, IngestReport* report) {
  const CsvFile stations = read_csv(stations_csv);
  require_header(stations, {"site", "x_km", "y_km", "dist_coast_km"});
  records::TemperaturePanel panel;
  std::map<std::string, int> site_index;
  for (const auto& [line, f] : stations.rows) {
    const std::string id = trim(f[0]);
    if (id.empty()) fail(stations_csv, line, "empty site id");
    if (!site_index.emplace(id, panel.n_sites()).second)
      fail(stations_csv, line, "duplicate site " + id);
    panel.site_ids.push_back(id);
    panel.x_km.push_back(to_double(stations_csv, line, f[1], "x_km"));
    panel.y_km.push_back(to_double(stations_csv, line, f[2], "y_km"));
    panel.dist_coast_km.push_back(
        to_double(stations_csv, line, f[3], "dist_coast_km"));
  }
  if (panel.site_ids.empty()) throw Error(stations_csv + ": no stations");

  const CsvFile temps = read_csv(temps_csv);
  require_header(temps, {"site", "year", "doy", "tmax_c"});
  struct Row {
    long line;
    int site;
    long year;
    int doy;
    double value;
  };
  std::vector<Row> rows;
  long year_lo = 0, year_hi = 0;
  int dropped = 0;
  for (const auto& [line, f] : temps.rows) {
    const std::string id = trim(f[0]);
    const auto it = site_index.find(id);
    if (it == site_index.end())
      fail(temps_csv, line, "unknown site " + id);
    const long year = to_long(temps_csv, line, f[1], "year");
    long doy = to_long(temps_csv, line, f[2], "doy");
    if (calendar_doy) {
      const long max_doy = is_leap(year) ? 366 : 365;
      if (doy < 1 || doy > max_doy)
        fail(temps_csv, line, "doy outside 1.." + std::to_string(max_doy));
      if (is_leap(year)) {
        if (doy == 60) {  // Feb 29
          ++dropped;
          continue;
        }
        if (doy > 60) --doy;
      }
    } else if (doy < 1 || doy > 365) {
      fail(temps_csv, line, "doy outside 1..365");
    }
    const std::string raw = trim(f[3]);
    const double v = raw.empty() ? records::kMissing
                                 : to_double(temps_csv, line, f[3], "tmax_c");
    if (rows.empty()) {
      year_lo = year_hi = year;
    } else {
      year_lo = std::min(year_lo, year);
      year_hi = std::max(year_hi, year);
    }
    rows.push_back({line, it->second, year, static_cast<int>(doy), v});
  }
  if (rows.empty()) throw Error(temps_csv + ": no temperature rows");

  panel.n_years = static_cast<int>(year_hi - year_lo + 1);
  panel.n_days = 365;
  panel.first_year = static_cast<int>(year_lo);
  panel.init_storage();
  std::vector<uint8_t> seen(panel.temps.size(), 0);
  for (const auto& r : rows) {
    const int t = static_cast<int>(r.year - year_lo) + 1;
    const size_t at = panel.idx(r.site, t, r.doy);
    if (seen[at])
      fail(temps_csv, r.line, "duplicate (site,year,doy) observation");
    seen[at] = 1;
    panel.temps[at] = r.value;
  }
  panel.validate();
  if (report) {
    report->temperature_rows = static_cast<long>(rows.size());
    report->dropped_feb29 = dropped;
  }
  return panel;
}

void write_indicators(const records::RecordTensor& tensor,
                      const std::vector<std::string>& site_ids, int first_year,
                      const std::string& path) {
  if (static_cast<int>(site_ids.size()) != tensor.n_sites)
    throw Error("write_indicators: site id count mismatch");
  auto out = open_out(path);
  out << "site,year,doy,indicator,tie_r\n";
  for (int s = 0; s < tensor.n_sites; ++s)
    for (int t = 1; t <= tensor.n_years; ++t)
      for (int d = 1; d <= tensor.n_days; ++d) {
        const int16_t code = tensor.at(s, t, d);
        const int year = first_year > 0 ? first_year + t - 1 : t;
        out << site_ids[s] << ',' << year << ',' << d << ','
            << (code >= 1 ? 1 : 0) << ','
            << (code >= 2 ? code : (code == 1 ? 1 : 0)) << '\n';
      }
}

records::RecordTensor read_indicators(const std::string& path,
                                      std::vector<std::string>* site_ids,
                                      int* first_year) {
  const CsvFile f = read_csv(path);
  require_header(f, {"site", "year", "doy", "indicator", "tie_r"});
  std::map<std::string, int> site_index;
  std::vector<std::string> ids;
  long year_lo = 0, year_hi = 0;
  int max_doy = 0;
  struct Row {
    long line;
    int site;
    long year;
    int doy;
    int16_t code;
  };
  std::vector<Row> rows;
  for (const auto& [line, fields] : f.rows) {
    const std::string id = trim(fields[0]);
    auto it = site_index.find(id);
    if (it == site_index.end()) {
      it = site_index.emplace(id, static_cast<int>(ids.size())).first;
      ids.push_back(id);
    }
    const long year = to_long(path, line, fields[1], "year");
    const long doy = to_long(path, line, fields[2], "doy");
    const long indicator = to_long(path, line, fields[3], "indicator");
    const long tie_r = to_long(path, line, fields[4], "tie_r");
    if (doy < 1 || doy > 365) fail(path, line, "doy outside 1..365");
    if (indicator != 0 && indicator != 1) fail(path, line, "indicator not 0/1");
    if (tie_r < 0 || (tie_r >= 2 && indicator != 1) ||
        (indicator == 1 && tie_r == 0))
      fail(path, line, "inconsistent indicator/tie_r pair");
    const int16_t code =
        tie_r >= 2 ? static_cast<int16_t>(tie_r)
                   : static_cast<int16_t>(indicator);
    if (rows.empty()) {
      year_lo = year_hi = year;
    } else {
      year_lo = std::min(year_lo, year);
      year_hi = std::max(year_hi, year);
    }
    max_doy = std::max(max_doy, static_cast<int>(doy));
    rows.push_back({line, it->second, year, static_cast<int>(doy), code});
  }
  if (rows.empty()) throw Error(path + ": no indicator rows");
  records::RecordTensor tensor;
  tensor.n_sites = static_cast<int>(ids.size());
  tensor.n_years = static_cast<int>(year_hi - year_lo + 1);
  tensor.n_days = max_doy;
  tensor.init_storage();
  std::vector<uint8_t> seen(tensor.ind.size(), 0);
  for (const auto& r : rows) {
    const int t = static_cast<int>(r.year - year_lo) + 1;
    const size_t at = tensor.idx(r.site, t, r.doy);
    if (seen[at]) fail(path, r.line, "duplicate (site,year,doy) indicator");
    seen[at] = 1;
    tensor.ind[at] = r.code;
  }
  if (site_ids) *site_ids = ids;
  if (first_year) *first_year = static_cast<int>(year_lo);
  return tensor;
}

krige::PredictionGrid read_grid(const std::string& path) {
  const CsvFile f = read_csv(path);
  const std::vector<std::string> base = {"cell_id", "x_km", "y_km",
                                         "dist_coast_km"};
  std::vector<std::string> with_block = base;
  with_block.push_back("block");
  const bool has_block = f.header == with_block;
  if (!has_block) require_header(f, base);
  krige::PredictionGrid grid;
  for (const auto& [line, fields] : f.rows) {
    grid.cell_ids.push_back(trim(fields[0]));
    grid.x_km.push_back(to_double(path, line, fields[1], "x_km"));
    grid.y_km.push_back(to_double(path, line, fields[2], "y_km"));
    grid.dist_coast_km.push_back(
        to_double(path, line, fields[3], "dist_coast_km"));
    if (has_block) grid.block.push_back(trim(fields[4]));
  }
  grid.validate();
  return grid;
}

diagnostics::CVPlan read_cv_plan(const std::string& path) {
  const CsvFile f = read_csv(path);
  require_header(f, {"group", "site"});
  diagnostics::CVPlan plan;
  std::map<std::string, size_t> group_index;
  for (const auto& [line, fields] : f.rows) {
    const std::string g = trim(fields[0]);
    const std::string site = trim(fields[1]);
    if (site.empty()) fail(path, line, "empty site id");
    auto it = group_index.find(g);
    if (it == group_index.end()) {
      it = group_index.emplace(g, plan.groups.size()).first;
      plan.groups.emplace_back();
    }
    plan.groups[it->second].push_back(site);
  }
  if (plan.groups.empty()) throw Error(path + ": no plan rows");
  return plan;
}

void write_cv_plan(const diagnostics::CVPlan& plan, const std::string& path) {
  auto out = open_out(path);
  out << "group,site\n";
  for (size_t g = 0; g < plan.groups.size(); ++g)
    for (const auto& site : plan.groups[g]) out << g << ',' << site << '\n';
}

// --- draw persistence --------------------------------------------------------

void persist_draws(const mcmc::PosteriorDraws& draws, const std::string& dir) {
  fs::create_directories(dir);
  const auto& m = draws.meta;
  const int nd = m.n_days;
  const bool has_latent = !draws.latent_y.empty();

  {
    auto out = open_out((fs::path(dir) / "model_meta.txt").string());
    const auto put = [&](const std::string& k, const std::string& v) {
      out << k << " = " << v << '\n';
    };
    put("format_version", std::to_string(kDrawFormatVersion));
    put("library_version", kVersion);
    put("variant", mcmc::to_string(m.variant));
    put("T", std::to_string(m.T));
    put("n_days", std::to_string(m.n_days));
    put("n_sites", std::to_string(m.n_sites));
    put("chains", std::to_string(m.chains));
    put("draws_per_chain", std::to_string(m.draws_per_chain));
    put("iterations", std::to_string(m.iterations));
    put("burnin", std::to_string(m.burnin));
    put("thin", std::to_string(m.thin));
    put("seed", std::to_string(m.seed));
    put("prior_beta_sd", format_double(m.priors.beta_sd));
    put("prior_a_sigma", format_double(m.priors.a_sigma));
    put("prior_b_sigma", format_double(m.priors.b_sigma));
    put("prior_a_phi", format_double(m.priors.a_phi));
    put("prior_b_phi", format_double(m.priors.b_phi));
    put("first_year", std::to_string(m.first_year));
    put("site_ids", join_strings(m.site_ids));
    put("x_km", join_doubles(m.x_km.data(), static_cast<long>(m.x_km.size())));
    put("y_km", join_doubles(m.y_km.data(), static_cast<long>(m.y_km.size())));
    put("dist_coast", join_doubles(m.dist_coast.data(),
                                   static_cast<long>(m.dist_coast.size())));
    put("log_dist", join_doubles(m.log_dist.data(),
                                 static_cast<long>(m.log_dist.size())));
    put("basis_degree", std::to_string(m.basis.degree()));
    put("basis_scale", format_double(m.basis.scale()));
    put("basis_rinv",
        join_doubles(m.basis.transform().data(), m.basis.transform().size()));
    put("scale_main_mean",
        join_doubles(m.scale_main.mean.data(), m.scale_main.mean.size()));
    put("scale_main_sd",
        join_doubles(m.scale_main.sd.data(), m.scale_main.sd.size()));
    put("scale_init1_mean",
        join_doubles(m.scale_init1.mean.data(), m.scale_init1.mean.size()));
    put("scale_init1_sd",
        join_doubles(m.scale_init1.sd.data(), m.scale_init1.sd.size()));
    put("scale_init2_mean",
        join_doubles(m.scale_init2.mean.data(), m.scale_init2.mean.size()));
    put("scale_init2_sd",
        join_doubles(m.scale_init2.sd.data(), m.scale_init2.sd.size()));
    put("lambda_acceptance",
        join_doubles(m.lambda_acceptance.data(),
                     static_cast<long>(m.lambda_acceptance.size())));
    put("phi_acceptance",
        join_doubles(m.phi_acceptance.data(),
                     static_cast<long>(m.phi_acceptance.size())));
    put("param_names", join_strings(draws.param_names));
    put("has_surfaces", draws.surfaces.empty() ? "0" : "1");
    put("has_day_means", draws.day_means.empty() ? "0" : "1");
    put("has_latent", has_latent ? "1" : "0");
    if (has_latent)
      put("latent_len", std::to_string(draws.latent_y[0][0].size()));
  }

  {
    auto out = open_out((fs::path(dir) / "params.csv").string());
    out << "param,chain,draw,value\n";
    for (int c = 0; c < m.chains; ++c)
      for (int k = 0; k < m.draws_per_chain; ++k)
        for (int j = 0; j < draws.n_params(); ++j)
          out << draws.param_names[j] << ',' << c << ',' << k << ','
              << format_double(draws.params[c](k, j)) << '\n';
  }

  if (!draws.surfaces.empty()) {
    auto out = open_out((fs::path(dir) / "w_surfaces.csv").string());
    out << "chain,draw,t,doy,site,value\n";
    for (int c = 0; c < m.chains; ++c)
      for (int k = 0; k < m.draws_per_chain; ++k) {
        const Eigen::MatrixXd& w = draws.surfaces[c][k];
        for (long r = 0; r < w.rows(); ++r) {
          const int t = m.variant == mcmc::Variant::kM5
                            ? static_cast<int>(r) / nd + 2
                            : 0;
          const int doy =
              m.variant == mcmc::Variant::kM5 ? static_cast<int>(r) % nd + 1 : 0;
          for (long s = 0; s < w.cols(); ++s)
            out << c << ',' << k << ',' << t << ',' << doy << ',' << s << ','
                << format_double(w(r, s)) << '\n';
        }
      }
  }

  if (!draws.day_means.empty()) {
    auto out = open_out((fs::path(dir) / "w_daily_means.csv").string());
    out << "chain,draw,t,doy,value\n";
    for (int c = 0; c < m.chains; ++c)
      for (int k = 0; k < m.draws_per_chain; ++k) {
        const Eigen::VectorXd& wm = draws.day_means[c][k];
        for (long i = 0; i < wm.size(); ++i)
          out << c << ',' << k << ',' << static_cast<int>(i) / nd + 2 << ','
              << static_cast<int>(i) % nd + 1 << ',' << format_double(wm[i])
              << '\n';
      }
  }

  if (has_latent) {
    const auto dump = [&](const char* name,
                          const std::vector<std::vector<Eigen::VectorXd>>& v) {
      auto out = open_out((fs::path(dir) / name).string());
      out << "chain,draw,cell,value\n";
      for (int c = 0; c < m.chains; ++c)
        for (int k = 0; k < m.draws_per_chain; ++k)
          for (long i = 0; i < v[c][k].size(); ++i)
            out << c << ',' << k << ',' << i << ','
                << format_double(v[c][k][i]) << '\n';
    };
    dump("latent_y.csv", draws.latent_y);
    dump("latent_lam.csv", draws.latent_lam);
  }
}

namespace {

std::map<std::string, std::string> read_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::map<std::string, std::string> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos) fail(path, line_no, "expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) fail(path, line_no, "empty key");
    out[key] = trim(t.substr(eq + 1));
  }
  return out;
}

const std::string& require_key(const std::map<std::string, std::string>& kv,
                               const std::string& path,
                               const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw Error(path + ": missing key " + key);
  return it->second;
}

void check_nan_free(const Eigen::MatrixXd& m, const std::string& what) {
  if (m.size() > 0 && m.hasNaN())
    throw Error("draw files truncated or inconsistent: " + what);
}

}  // namespace

mcmc::PosteriorDraws load_draws(const std::string& dir) {
  const std::string meta_path = (fs::path(dir) / "model_meta.txt").string();
  const auto kv = read_kv_file(meta_path);
  if (require_key(kv, meta_path, "format_version") !=
      std::to_string(kDrawFormatVersion))
    throw Error(meta_path + ": unsupported draw format version " +
                kv.at("format_version"));

  mcmc::PosteriorDraws draws;
  mcmc::DrawsMeta& m = draws.meta;
  const auto get = [&](const std::string& k) -> const std::string& {
    return require_key(kv, meta_path, k);
  };
  m.variant = mcmc::variant_from_string(get("variant"));
  m.T = std::stoi(get("T"));
  m.n_days = std::stoi(get("n_days"));
  m.n_sites = std::stoi(get("n_sites"));
  m.chains = std::stoi(get("chains"));
  m.draws_per_chain = std::stoi(get("draws_per_chain"));
  m.iterations = std::stoi(get("iterations"));
  m.burnin = std::stoi(get("burnin"));
  m.thin = std::stoi(get("thin"));
  m.seed = std::stoull(get("seed"));
  m.priors.beta_sd = std::strtod(get("prior_beta_sd").c_str(), nullptr);
  m.priors.a_sigma = std::strtod(get("prior_a_sigma").c_str(), nullptr);
  m.priors.b_sigma = std::strtod(get("prior_b_sigma").c_str(), nullptr);
  m.priors.a_phi = std::strtod(get("prior_a_phi").c_str(), nullptr);
  m.priors.b_phi = std::strtod(get("prior_b_phi").c_str(), nullptr);
  m.first_year = std::stoi(get("first_year"));
  m.site_ids = split_csv(get("site_ids"));
  m.x_km = parse_doubles(meta_path, get("x_km"));
  m.y_km = parse_doubles(meta_path, get("y_km"));
  m.dist_coast = parse_doubles(meta_path, get("dist_coast"));
  m.log_dist = parse_doubles(meta_path, get("log_dist"));

  const int degree = std::stoi(get("basis_degree"));
  const auto rinv_v = parse_doubles(meta_path, get("basis_rinv"));
  if (static_cast<int>(rinv_v.size()) != (degree + 1) * (degree + 1))
    throw Error(meta_path + ": basis transform size mismatch");
  Eigen::MatrixXd rinv(degree + 1, degree + 1);
  std::copy(rinv_v.begin(), rinv_v.end(), rinv.data());
  m.basis = design::OrthoPolyBasis(
      degree, rinv, std::strtod(get("basis_scale").c_str(), nullptr));

  const auto load_scale = [&](const std::string& prefix) {
    design::ScalingSpec spec;
    const auto mean = parse_doubles(meta_path, get(prefix + "_mean"));
    const auto sd = parse_doubles(meta_path, get(prefix + "_sd"));
    if (mean.size() != sd.size())
      throw Error(meta_path + ": scaling spec size mismatch");
    spec.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(),
                                                  static_cast<long>(mean.size()));
    spec.sd = Eigen::Map<const Eigen::VectorXd>(sd.data(),
                                                static_cast<long>(sd.size()));
    return spec;
  };
  m.scale_main = load_scale("scale_main");
  m.scale_init1 = load_scale("scale_init1");
  m.scale_init2 = load_scale("scale_init2");
  m.lambda_acceptance = parse_doubles(meta_path, get("lambda_acceptance"));
  m.phi_acceptance = parse_doubles(meta_path, get("phi_acceptance"));
  const std::string& names = get("param_names");
  if (!names.empty()) draws.param_names = split_csv(names);
  const bool has_surfaces = get("has_surfaces") == "1";
  const bool has_day_means = get("has_day_means") == "1";
  const bool has_latent = get("has_latent") == "1";

  if (m.chains < 1 || m.draws_per_chain < 0)
    throw Error(meta_path + ": bad chain/draw counts");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const int np = draws.n_params();
  draws.params.assign(
      m.chains, Eigen::MatrixXd::Constant(m.draws_per_chain, np, nan));
  std::map<std::string, int> param_index;
  for (int j = 0; j < np; ++j) param_index[draws.param_names[j]] = j;

  {
    const std::string path = (fs::path(dir) / "params.csv").string();
    const CsvFile f = read_csv(path);
    require_header(f, {"param", "chain", "draw", "value"});
    for (const auto& [line, fields] : f.rows) {
      const auto it = param_index.find(trim(fields[0]));
      if (it == param_index.end())
        fail(path, line, "unknown parameter " + fields[0]);
      const long c = to_long(path, line, fields[1], "chain");
      const long k = to_long(path, line, fields[2], "draw");
      if (c < 0 || c >= m.chains || k < 0 || k >= m.draws_per_chain)
        fail(path, line, "chain/draw index out of range");
      draws.params[c](k, it->second) =
          to_double(path, line, fields[3], "value");
    }
    for (const auto& pm : draws.params) check_nan_free(pm, "params.csv");
  }

  const int n_day_cells = (m.T - 1) * m.n_days;
  if (has_surfaces) {
    const long rows = m.variant == mcmc::Variant::kM5 ? n_day_cells : 1;
    draws.surfaces.assign(
        m.chains,
        std::vector<Eigen::MatrixXd>(
            m.draws_per_chain,
            Eigen::MatrixXd::Constant(rows, m.n_sites, nan)));
    const std::string path = (fs::path(dir) / "w_surfaces.csv").string();
    const CsvFile f = read_csv(path);
    require_header(f, {"chain", "draw", "t", "doy", "site", "value"});
    for (const auto& [line, fields] : f.rows) {
      const long c = to_long(path, line, fields[0], "chain");
      const long k = to_long(path, line, fields[1], "draw");
      const long t = to_long(path, line, fields[2], "t");
      const long doy = to_long(path, line, fields[3], "doy");
      const long s = to_long(path, line, fields[4], "site");
      if (c < 0 || c >= m.chains || k < 0 || k >= m.draws_per_chain ||
          s < 0 || s >= m.n_sites)
        fail(path, line, "index out of range");
      long r = 0;
      if (m.variant == mcmc::Variant::kM5) {
        if (t < 2 || t > m.T || doy < 1 || doy > m.n_days)
          fail(path, line, "day cell out of range");
        r = (t - 2) * m.n_days + (doy - 1);
      } else if (t != 0 || doy != 0) {
        fail(path, line, "static surface rows must use t=0,doy=0");
      }
      draws.surfaces[c][k](r, s) = to_double(path, line, fields[5], "value");
    }
    for (const auto& chain : draws.surfaces)
      for (const auto& w : chain) check_nan_free(w, "w_surfaces.csv");
  }

  if (has_day_means) {
    draws.day_means.assign(
        m.chains, std::vector<Eigen::VectorXd>(
                      m.draws_per_chain,
                      Eigen::VectorXd::Constant(n_day_cells, nan)));
    const std::string path = (fs::path(dir) / "w_daily_means.csv").string();
    const CsvFile f = read_csv(path);
    require_header(f, {"chain", "draw", "t", "doy", "value"});
    for (const auto& [line, fields] : f.rows) {
      const long c = to_long(path, line, fields[0], "chain");
      const long k = to_long(path, line, fields[1], "draw");
      const long t = to_long(path, line, fields[2], "t");
      const long doy = to_long(path, line, fields[3], "doy");
      if (c < 0 || c >= m.chains || k < 0 || k >= m.draws_per_chain ||
          t < 2 || t > m.T || doy < 1 || doy > m.n_days)
        fail(path, line, "index out of range");
      draws.day_means[c][k][(t - 2) * m.n_days + (doy - 1)] =
          to_double(path, line, fields[4], "value");
    }
    for (const auto& chain : draws.day_means)
      for (const auto& wm : chain) check_nan_free(wm, "w_daily_means.csv");
  }

  if (has_latent) {
    const long latent_len = std::stol(get("latent_len"));
    const auto load_latent = [&](const char* name) {
      std::vector<std::vector<Eigen::VectorXd>> out(
          m.chains, std::vector<Eigen::VectorXd>(
                        m.draws_per_chain,
                        Eigen::VectorXd::Constant(latent_len, nan)));
      const std::string path = (fs::path(dir) / name).string();
      const CsvFile f = read_csv(path);
      require_header(f, {"chain", "draw", "cell", "value"});
      for (const auto& [line, fields] : f.rows) {
        const long c = to_long(path, line, fields[0], "chain");
        const long k = to_long(path, line, fields[1], "draw");
        const long i = to_long(path, line, fields[2], "cell");
        if (c < 0 || c >= m.chains || k < 0 || k >= m.draws_per_chain ||
            i < 0 || i >= latent_len)
          fail(path, line, "index out of range");
        out[c][k][i] = to_double(path, line, fields[3], "value");
      }
      for (const auto& chain : out)
        for (const auto& v : chain) check_nan_free(v, name);
      return out;
    };
    draws.latent_y = load_latent("latent_y.csv");
    draws.latent_lam = load_latent("latent_lam.csv");
  }
  return draws;
}

// --- key = value configuration ----------------------------------------------

KvConfig KvConfig::parse_file(const std::string& path) {
  KvConfig cfg;
  cfg.values_ = read_kv_file(path);
  return cfg;
}

KvConfig KvConfig::parse_string(const std::string& text,
                                const std::string& origin) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos) fail(origin, line_no, "expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) fail(origin, line_no, "empty key");
    cfg.values_[key] = trim(t.substr(eq + 1));
  }
  return cfg;
}

std::string KvConfig::get_str(const std::string& key,
                              const std::string& def) const {
  const auto it = values_.find(key);
  return it == values_.end() ? def : it->second;
}

long KvConfig::get_int(const std::string& key, long def) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return def;
  return to_long("config", 0, it->second, key.c_str());
}

double KvConfig::get_double(const std::string& key, double def) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return def;
  return to_double("config", 0, it->second, key.c_str());
}

bool KvConfig::get_bool(const std::string& key, bool def) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return def;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("config: bad boolean for " + key + ": " + v);
}

uint64_t KvConfig::get_u64(const std::string& key, uint64_t def) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return def;
  char* end = nullptr;
  const uint64_t v = std::strtoull(it->second.c_str(), &end, 10);
  if (end != it->second.c_str() + it->second.size())
    throw Error("config: bad integer for " + key + ": " + it->second);
  return v;
}

void KvConfig::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

mcmc::ModelSpec spec_from_config(const KvConfig& cfg) {
  static const std::set<std::string> known = {
      "model",       "iterations",       "burnin",
      "target_draws", "chains",          "seed",
      "threads",     "beta_sd",          "a_sigma",
      "b_sigma",     "a_phi",            "b_phi",
      "keep_latent", "intercept_in_beta", "phi_init",
      "phi_proposal_log_sd"};
  for (const auto& [k, v] : cfg.values())
    if (!known.count(k)) throw Error("config: unknown key `" + k + "`");
  mcmc::ModelSpec spec;
  spec.variant = mcmc::variant_from_string(cfg.get_str("model", "M5"));
  spec.iterations = static_cast<int>(cfg.get_int("iterations", spec.iterations));
  spec.burnin = static_cast<int>(cfg.get_int("burnin", spec.burnin));
  spec.target_draws =
      static_cast<int>(cfg.get_int("target_draws", spec.target_draws));
  spec.chains = static_cast<int>(cfg.get_int("chains", spec.chains));
  spec.seed = cfg.get_u64("seed", spec.seed);
  spec.threads = static_cast<int>(cfg.get_int("threads", spec.threads));
  spec.priors.beta_sd = cfg.get_double("beta_sd", spec.priors.beta_sd);
  spec.priors.a_sigma = cfg.get_double("a_sigma", spec.priors.a_sigma);
  spec.priors.b_sigma = cfg.get_double("b_sigma", spec.priors.b_sigma);
  spec.priors.a_phi = cfg.get_double("a_phi", spec.priors.a_phi);
  spec.priors.b_phi = cfg.get_double("b_phi", spec.priors.b_phi);
  spec.keep_latent = cfg.get_bool("keep_latent", spec.keep_latent);
  spec.intercept_in_beta =
      cfg.get_bool("intercept_in_beta", spec.intercept_in_beta);
  spec.phi_init = cfg.get_double("phi_init", spec.phi_init);
  spec.phi_proposal_log_sd =
      cfg.get_double("phi_proposal_log_sd", spec.phi_proposal_log_sd);
  return spec;
}

// --- run manifest -------------------------------------------------------------

uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  uint64_t h = 14695981039346656037ULL;
  char buf[65536];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::string library_version() { return kVersion; }

void RunManifest::set(const std::string& key, const std::string& value) {
  entries_.emplace_back(key, value);
}

void RunManifest::set_file_hash(const std::string& key,
                                const std::string& path) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016" PRIx64, fnv1a64_file(path));
  entries_.emplace_back(key, buf);
}

void RunManifest::write(const std::string& path) const {
  auto out = open_out(path);
  for (const auto& [k, v] : entries_) out << k << " = " << v << '\n';
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::string>& rows) {
  auto out = open_out(path);
  out << header << '\n';
  for (const auto& r : rows) out << r << '\n';
}

}  // namespace recbayes::io
