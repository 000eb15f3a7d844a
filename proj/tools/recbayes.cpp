// command-line front end: simulate / records / eda / fit / predict /
// crossval / diagnose / design
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "recbayes/diagnostics.hpp"
#include "recbayes/eda.hpp"
#include "recbayes/io.hpp"
#include "recbayes/krige.hpp"
#include "recbayes/mcmc.hpp"
#include "recbayes/records.hpp"
#include "recbayes/stats.hpp"

namespace fs = std::filesystem;
using namespace recbayes;

namespace {

std::string g_stage = "startup";  // step identifier for error reports

void stage(const std::string& s) { g_stage = s; }

struct Summary {
  double mean, q05, q95;
};

Summary summarize(std::vector<double> v) {
  Summary s{};
  s.mean = stats::shifted_mean(v);
  s.q05 = stats::quantile(v, 0.05);
  s.q95 = stats::quantile(std::move(v), 0.95);
  return s;
}

std::string row3(const Summary& s) {
  return io::format_double(s.mean) + "," + io::format_double(s.q05) + "," +
         io::format_double(s.q95);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  size_t start = 0;
  for (size_t i = 0; i <= s.size(); ++i)
    if (i == s.size() || s[i] == ',') {
      if (i > start) out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  return out;
}

void write_run_log(const std::string& dir,
                   std::chrono::steady_clock::time_point t0,
                   int threads = -1) {
  const auto wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
  // timing and the thread budget live outside the manifest: they vary
  // between reruns while the results stay byte-identical
  std::vector<std::string> rows{std::string("started_utc,") + buf,
                                "wall_seconds," + io::format_double(wall)};
  if (threads >= 0) rows.push_back("threads," + std::to_string(threads));
  io::write_csv((fs::path(dir) / "run_log.txt").string(), "key,value", rows);
}

records::TemperaturePanel drop_sites(const records::TemperaturePanel& panel,
                                     const std::set<std::string>& drop) {
  records::TemperaturePanel out;
  out.n_years = panel.n_years;
  out.n_days = panel.n_days;
  out.first_year = panel.first_year;
  std::vector<int> keep;
  for (int s = 0; s < panel.n_sites(); ++s)
    if (!drop.count(panel.site_ids[s])) {
      keep.push_back(s);
      out.site_ids.push_back(panel.site_ids[s]);
      out.x_km.push_back(panel.x_km[s]);
      out.y_km.push_back(panel.y_km[s]);
      out.dist_coast_km.push_back(panel.dist_coast_km[s]);
    }
  if (keep.empty()) throw Error("dedupe-region removed every site");
  out.init_storage();
  for (size_t i = 0; i < keep.size(); ++i)
    for (int t = 1; t <= panel.n_years; ++t)
      for (int d = 1; d <= panel.n_days; ++d)
        out.at(static_cast<int>(i), t, d) = panel.at(keep[i], t, d);
  return out;
}

// --- subcommand option bags ---------------------------------------------------

struct SimulateOpts {
  std::string model = "crm", out_dir = "sim_out";
  double c = 0.035, sigma = 3.56;
  int T = 62, reps = 100;
  uint64_t seed = 1;
};

struct RecordsOpts {
  std::string in, stations, out = "indicators.csv";
  bool calendar_doy = false;
};

struct EdaOpts {
  std::string in, stations, out_dir = "eda_out", dedupe, tie_rule = "exclude";
  bool calendar_doy = false;
};

struct FitOpts {
  std::string in, stations, config, model, out_dir = "fit_out";
  bool calendar_doy = false;
  int64_t seed = -1;
  int threads = 0, iterations = 0, chains = 0;
};

struct PredictOpts {
  std::string draws, grid, out_dir = "predict_out", stats = "nbar,ratio",
              block;
  int t1 = 1, t2 = 0, l1 = 1, l2 = 0, t_max = 0, threads = 1;
  uint64_t seed = 99;
};

struct CrossvalOpts {
  std::string in, stations, config, model, plan, out_dir = "cv_out",
              periods = "2:31,32:62";
  bool calendar_doy = false;
  int groups = 10, fold_threads = 1;
  int64_t seed = -1;
};

struct DiagnoseOpts {
  std::string draws, out_dir = "diag_out";
};

struct DesignOpts {
  std::string out = "design.csv", doys = "1,2,3,32,100,200,365";
  int T = 62;
  double log_dist = 3.912023005428146;  // log(50 km)
  double lag1 = 0, lag2 = 0;
};

// --- handlers -----------------------------------------------------------------

void run_simulate(const SimulateOpts& o) {
  stage("simulate.setup");
  records::SeriesModel model;
  if (o.model == "crm") {
    model.kind = records::SeriesModel::Kind::kCRM;
  } else if (o.model == "ldm") {
    model.kind = records::SeriesModel::Kind::kLDM;
    model.c = o.c;
    model.sigma = o.sigma;
  } else {
    throw Error("simulate: model must be crm or ldm");
  }
  if (o.T < 2 || o.reps < 1) throw Error("simulate: need T >= 2, reps >= 1");
  const auto t0 = std::chrono::steady_clock::now();

  stage("simulate.run");
  RngStream root(o.seed);
  std::vector<std::string> series_rows;
  std::vector<double> record_rate(o.T, 0.0);
  for (int rep = 0; rep < o.reps; ++rep) {
    RngStream rng = root.fork(rep);
    const auto y = records::simulate_series(model, o.T, rng);
    const auto codes = records::extract_series(y);
    for (int t = 1; t <= o.T; ++t) {
      series_rows.push_back(std::to_string(rep) + "," + std::to_string(t) +
                            "," + io::format_double(y[t - 1]));
      record_rate[t - 1] += records::indicator_value(
          codes[t - 1], records::TieRule::kExclude);
    }
  }
  stage("simulate.write");
  io::write_csv((fs::path(o.out_dir) / "series.csv").string(), "rep,t,value",
                series_rows);
  std::vector<std::string> summary_rows;
  for (int t = 1; t <= o.T; ++t)
    summary_rows.push_back(std::to_string(t) + "," +
                           io::format_double(record_rate[t - 1] / o.reps) +
                           "," + io::format_double(records::crm_probability(t)));
  io::write_csv((fs::path(o.out_dir) / "summary.csv").string(),
                "t,p_hat,p_crm", summary_rows);
  io::RunManifest man;
  man.set("command", "simulate");
  man.set("library_version", io::library_version());
  man.set("model", o.model);
  man.set("c", io::format_double(o.c));
  man.set("sigma", io::format_double(o.sigma));
  man.set("T", std::to_string(o.T));
  man.set("reps", std::to_string(o.reps));
  man.set("seed", std::to_string(o.seed));
  man.set_file_hash("output.series", (fs::path(o.out_dir) / "series.csv").string());
  man.write((fs::path(o.out_dir) / "manifest.txt").string());
  write_run_log(o.out_dir, t0);
}

void run_records(const RecordsOpts& o) {
  stage("records.ingest");
  io::IngestReport report;
  const auto panel = io::read_panel(o.in, o.stations, o.calendar_doy, &report);
  if (report.dropped_feb29 > 0)
    std::cerr << "records: dropped " << report.dropped_feb29
              << " Feb-29 rows\n";
  stage("records.extract");
  const auto tensor = records::extract_records(panel);
  stage("records.write");
  io::write_indicators(tensor, panel.site_ids, panel.first_year, o.out);
  io::RunManifest man;
  man.set("command", "records");
  man.set("library_version", io::library_version());
  man.set("calendar_doy", o.calendar_doy ? "1" : "0");
  man.set("dropped_feb29", std::to_string(report.dropped_feb29));
  man.set_file_hash("input.temperatures", o.in);
  man.set_file_hash("input.stations", o.stations);
  man.set_file_hash("output.indicators", o.out);
  man.write(o.out + ".manifest.txt");
}

void run_eda(const EdaOpts& o) {
  stage("eda.ingest");
  const auto t0 = std::chrono::steady_clock::now();
  auto panel = io::read_panel(o.in, o.stations, o.calendar_doy, nullptr);
  if (!o.dedupe.empty()) {
    const auto drop_list = split_list(o.dedupe);
    panel = drop_sites(panel, {drop_list.begin(), drop_list.end()});
  }
  const records::TieRule rule = o.tie_rule == "weak"
                                    ? records::TieRule::kIncludeWeak
                                    : records::TieRule::kExclude;
  stage("eda.extract");
  const auto tensor = records::extract_records(panel);

  stage("eda.yearly");
  const auto p_hat = eda::empirical_p_hat(tensor, rule);
  std::vector<std::string> yearly;
  for (int t = 2; t <= panel.n_years; ++t) {
    const auto tab = eda::persistence_table(tensor, t, rule);
    const auto tab3 = eda::persistence_table3(tensor, t, rule);
    const auto [lor_given1, lor_given0] = eda::second_order_lors(tab3);
    yearly.push_back(std::to_string(t) + "," +
                     io::format_double(p_hat[t - 2]) + "," +
                     io::format_double(eda::log_odds_ratio(tab)) + "," +
                     io::format_double(lor_given1) + "," +
                     io::format_double(lor_given0));
  }
  io::write_csv((fs::path(o.out_dir) / "yearly.csv").string(),
                "t,p_hat,lor1,lor_..1,lor_..0", yearly);

  stage("eda.models");
  const auto fit_data = mcmc::build_fit_data(panel, tensor);
  const int n = panel.n_sites(), T = panel.n_years, nd = panel.n_days;
  const long rows = static_cast<long>(n) * (T - 1) * (nd - 2);
  Eigen::MatrixXd x(rows, design::kNumCovariates);
  Eigen::VectorXd y(rows), offset_stationary(rows);
  long at = 0;
  for (int t = 2; t <= T; ++t)
    for (int d = 3; d <= nd; ++d)
      for (int s = 0; s < n; ++s) {
        std::array<double, design::kNumCovariates> row{};
        design::build_design_row(
            {t, d,
             records::indicator_value(tensor.at(s, t, d - 1), rule),
             records::indicator_value(tensor.at(s, t, d - 2), rule),
             std::log(panel.dist_coast_km[s])},
            fit_data.basis, row);
        for (int j = 0; j < design::kNumCovariates; ++j) x(at, j) = row[j];
        y[at] = records::indicator_value(tensor.at(s, t, d), rule);
        offset_stationary[at] = -std::log(t - 1.0);
        ++at;
      }
  design::apply_scaling(fit_data.scale_main, x);
  const Eigen::VectorXd zero_offset = Eigen::VectorXd::Zero(rows);

  struct Ladder {
    const char* name;
    std::vector<int> cols;
    bool stationary_offset;
  };
  const std::vector<Ladder> ladder = {
      {"stationary", {}, true},
      {"intercept", {0}, false},
      {"trend", {0, 1, 2}, false},
      {"trend_lag", {0, 1, 2, 3, 4, 5}, false},
      {"trend_lag_seasonal", {0, 1, 2, 3, 4, 5, 9, 10}, false},
      {"full", [] {
         std::vector<int> all;
         for (int j = 0; j < design::kNumCovariates; ++j) all.push_back(j);
         return all;
       }(), false},
  };
  std::vector<std::string> model_rows;
  for (const auto& spec : ladder) {
    Eigen::MatrixXd xs(rows, static_cast<long>(spec.cols.size()));
    for (size_t j = 0; j < spec.cols.size(); ++j)
      xs.col(static_cast<long>(j)) = x.col(spec.cols[j]);
    const auto fit = eda::fit_logit_mle(
        xs, y, spec.stationary_offset ? offset_stationary : zero_offset);
    model_rows.push_back(std::string(spec.name) + "," +
                         std::to_string(fit.dof) + "," +
                         io::format_double(fit.loglik) + "," +
                         io::format_double(fit.aic));
  }
  io::write_csv((fs::path(o.out_dir) / "models.csv").string(),
                "model,dof,loglik,aic", model_rows);

  io::RunManifest man;
  man.set("command", "eda");
  man.set("library_version", io::library_version());
  man.set("tie_rule", o.tie_rule);
  man.set("dedupe_region", o.dedupe);
  man.set_file_hash("input.temperatures", o.in);
  man.set_file_hash("input.stations", o.stations);
  man.write((fs::path(o.out_dir) / "manifest.txt").string());
  write_run_log(o.out_dir, t0);
}

mcmc::ModelSpec resolve_spec(const std::string& config_path,
                             const std::string& model, int64_t seed,
                             int threads, int iterations, int chains) {
  io::KvConfig cfg;
  if (!config_path.empty()) cfg = io::KvConfig::parse_file(config_path);
  mcmc::ModelSpec spec = io::spec_from_config(cfg);
  if (!model.empty()) spec.variant = mcmc::variant_from_string(model);
  if (seed >= 0) spec.seed = static_cast<uint64_t>(seed);
  if (threads > 0) spec.threads = threads;
  if (iterations > 0) spec.iterations = iterations;
  if (chains > 0) spec.chains = chains;
  return spec;
}

void manifest_spec(io::RunManifest& man, const mcmc::ModelSpec& spec) {
  man.set("spec.model", mcmc::to_string(spec.variant));
  man.set("spec.iterations", std::to_string(spec.iterations));
  man.set("spec.burnin", std::to_string(spec.burnin));
  man.set("spec.target_draws", std::to_string(spec.target_draws));
  man.set("spec.chains", std::to_string(spec.chains));
  man.set("spec.seed", std::to_string(spec.seed));
  man.set("spec.beta_sd", io::format_double(spec.priors.beta_sd));
  man.set("spec.a_sigma", io::format_double(spec.priors.a_sigma));
  man.set("spec.b_sigma", io::format_double(spec.priors.b_sigma));
  man.set("spec.a_phi", io::format_double(spec.priors.a_phi));
  man.set("spec.b_phi", io::format_double(spec.priors.b_phi));
  man.set("spec.phi_init", io::format_double(spec.phi_init));
  man.set("spec.phi_proposal_log_sd",
          io::format_double(spec.phi_proposal_log_sd));
}

void run_fit(const FitOpts& o) {
  stage("fit.ingest");
  const auto t0 = std::chrono::steady_clock::now();
  const auto panel = io::read_panel(o.in, o.stations, o.calendar_doy, nullptr);
  stage("fit.extract");
  const auto tensor = records::extract_records(panel);
  stage("fit.spec");
  const mcmc::ModelSpec spec = resolve_spec(o.config, o.model, o.seed,
                                            o.threads, o.iterations, o.chains);
  stage("fit.sample");
  const auto draws = mcmc::run_chain(spec, panel, tensor);
  stage("fit.persist");
  const std::string draw_dir = (fs::path(o.out_dir) / "draws").string();
  io::persist_draws(draws, draw_dir);

  io::RunManifest man;
  man.set("command", "fit");
  man.set("library_version", io::library_version());
  manifest_spec(man, spec);
  man.set_file_hash("input.temperatures", o.in);
  man.set_file_hash("input.stations", o.stations);
  if (!o.config.empty()) man.set_file_hash("input.config", o.config);
  for (int c = 0; c < draws.meta.chains; ++c) {
    man.set("chain" + std::to_string(c) + ".lambda_acceptance",
            io::format_double(draws.meta.lambda_acceptance[c]));
    man.set("chain" + std::to_string(c) + ".phi_acceptance",
            io::format_double(draws.meta.phi_acceptance[c]));
  }
  man.set_file_hash("output.params",
                    (fs::path(draw_dir) / "params.csv").string());
  man.write((fs::path(o.out_dir) / "manifest.txt").string());
  write_run_log(o.out_dir, t0, spec.threads);
}

void run_predict(const PredictOpts& o) {
  stage("predict.load");
  const auto t0 = std::chrono::steady_clock::now();
  const auto draws = io::load_draws(o.draws);
  const auto grid = io::read_grid(o.grid);
  const int T = draws.meta.T;
  const int t2 = o.t2 > 0 ? o.t2 : T;
  const int l2 = o.l2 > 0 ? o.l2 : draws.meta.n_days;
  const int t_max = o.t_max > 0 ? o.t_max : t2;
  const auto stats_list = split_list(o.stats);

  stage("predict.simulate");
  const auto field =
      krige::simulate_predictive(draws, grid, t_max, o.seed, o.threads);

  stage("predict.summarize");
  std::vector<std::string> grid_rows, series_rows;
  for (const auto& stat : stats_list) {
    if (stat == "nbar" || stat == "ratio") {
      Eigen::MatrixXd by_cell = krige::nbar_by_cell(field, o.t1, t2, o.l1, l2);
      if (stat == "ratio")
        by_cell /= records::expected_stationary_records(o.t1, t2);
      for (int c = 0; c < field.n_cells; ++c) {
        std::vector<double> v(by_cell.col(c).data(),
                              by_cell.col(c).data() + by_cell.rows());
        grid_rows.push_back(grid.cell_ids[c] + "," + stat + "," +
                            row3(summarize(std::move(v))));
      }
    } else if (stat == "ers") {
      const auto cells = grid.block_cells(o.block);
      std::vector<int> day_set;
      for (int l = o.l1; l <= l2; ++l) day_set.push_back(l);
      for (int t = o.t1; t <= t2; ++t) {
        auto per_draw = krige::ers_bar(field, t, day_set, cells);
        for (double& v : per_draw) v *= t;  // stationary expectation is 1
        series_rows.push_back(std::to_string(t) + ",t_ers_bar," +
                              row3(summarize(std::move(per_draw))));
      }
    } else {
      throw Error("predict: unknown stat `" + stat + "`");
    }
  }
  if (!grid_rows.empty())
    io::write_csv((fs::path(o.out_dir) / "grid_stats.csv").string(),
                  "cell_id,stat,mean,q05,q95", grid_rows);
  if (!series_rows.empty())
    io::write_csv((fs::path(o.out_dir) / "series_stats.csv").string(),
                  "t,stat,mean,q05,q95", series_rows);

  io::RunManifest man;
  man.set("command", "predict");
  man.set("library_version", io::library_version());
  man.set("stats", o.stats);
  man.set("t1", std::to_string(o.t1));
  man.set("t2", std::to_string(t2));
  man.set("l1", std::to_string(o.l1));
  man.set("l2", std::to_string(l2));
  man.set("t_max", std::to_string(t_max));
  man.set("block", o.block);
  man.set("seed", std::to_string(o.seed));
  man.set_file_hash("input.grid", o.grid);
  man.set_file_hash("input.params",
                    (fs::path(o.draws) / "params.csv").string());
  man.write((fs::path(o.out_dir) / "manifest.txt").string());
  write_run_log(o.out_dir, t0, o.threads);
}

void run_crossval(const CrossvalOpts& o) {
  stage("crossval.ingest");
  const auto t0 = std::chrono::steady_clock::now();
  const auto panel = io::read_panel(o.in, o.stations, o.calendar_doy, nullptr);
  stage("crossval.spec");
  const mcmc::ModelSpec spec =
      resolve_spec(o.config, o.model, o.seed, 0, 0, 0);

  stage("crossval.plan");
  diagnostics::CVPlan plan;
  if (!o.plan.empty()) {
    plan = io::read_cv_plan(o.plan);
  } else {
    plan = diagnostics::make_cv_plan(panel.site_ids, o.groups, spec.seed);
  }
  io::write_cv_plan(plan, (fs::path(o.out_dir) / "plan.csv").string());

  stage("crossval.periods");
  std::vector<diagnostics::CrossvalPeriod> periods;
  for (const auto& tok : split_list(o.periods)) {
    const size_t colon = tok.find(':');
    if (colon == std::string::npos)
      throw Error("crossval: periods must look like `2:31,32:62`");
    diagnostics::CrossvalPeriod p;
    p.t_lo = std::stoi(tok.substr(0, colon));
    p.t_hi = std::stoi(tok.substr(colon + 1));
    p.label = tok.substr(0, colon) + "-" + tok.substr(colon + 1);
    periods.push_back(p);
  }

  stage("crossval.run");
  const auto result =
      diagnostics::run_crossval(spec, panel, plan, periods, o.fold_threads);
  for (const auto& err : result.errors) std::cerr << "crossval: " << err << '\n';

  stage("crossval.write");
  const std::string model_name = mcmc::to_string(spec.variant);
  std::vector<std::string> fold_rows;
  for (const auto& fm : result.folds)
    fold_rows.push_back(model_name + "," + std::to_string(fm.fold) + "," +
                        fm.period + "," + io::format_double(fm.bs) + "," +
                        (fm.auc_valid ? io::format_double(fm.auc) : ""));
  io::write_csv((fs::path(o.out_dir) / "folds.csv").string(),
                "model,fold,period,bs,auc", fold_rows);
  std::vector<std::string> summary_rows;
  for (const auto& s : result.summary)
    summary_rows.push_back(model_name + "," + s.period + "," +
                           io::format_double(s.bs) + "," +
                           io::format_double(s.auc) + "," +
                           std::to_string(s.folds_in_auc) + "," +
                           std::to_string(s.n));
  io::write_csv((fs::path(o.out_dir) / "summary.csv").string(),
                "model,period,bs,auc,folds_in_auc,n", summary_rows);
  if (!result.errors.empty())
    io::write_csv((fs::path(o.out_dir) / "errors.txt").string(), "error",
                  result.errors);

  io::RunManifest man;
  man.set("command", "crossval");
  man.set("library_version", io::library_version());
  manifest_spec(man, spec);
  man.set("periods", o.periods);
  man.set("groups", std::to_string(static_cast<int>(plan.groups.size())));
  man.set_file_hash("input.temperatures", o.in);
  man.set_file_hash("input.stations", o.stations);
  if (!o.config.empty()) man.set_file_hash("input.config", o.config);
  man.write((fs::path(o.out_dir) / "manifest.txt").string());
  write_run_log(o.out_dir, t0, o.fold_threads);
  if (result.errors.size() == plan.groups.size())
    throw Error("crossval: every fold failed");
}

void run_diagnose(const DiagnoseOpts& o) {
  stage("diagnose.load");
  const auto t0 = std::chrono::steady_clock::now();
  const auto draws = io::load_draws(o.draws);
  stage("diagnose.psrf");
  std::vector<std::string> rows;
  if (draws.n_params() > 0 && draws.meta.chains >= 2) {
    const auto factors = diagnostics::psrf_all(draws);
    for (int j = 0; j < draws.n_params(); ++j)
      rows.push_back(draws.param_names[j] + "," +
                     io::format_double(factors[j]));
    // the pooled within covariance has rank at most (split sequences) x
    // (half length - 1); skip the multivariate statistic when that cannot
    // reach full rank, and on numerically degenerate short runs
    const long h = draws.meta.draws_per_chain / 2;
    const long dof = 2L * draws.meta.chains * (h - 1);
    if (dof >= draws.n_params()) {
      std::vector<Eigen::MatrixXd> chains(draws.params.begin(),
                                          draws.params.end());
      try {
        rows.push_back(
            "_multivariate," +
            io::format_double(diagnostics::psrf_multivariate(chains)));
      } catch (const Error&) {
      }
    }
  }
  io::write_csv((fs::path(o.out_dir) / "psrf.csv").string(), "param,psrf",
                rows);
  std::vector<std::string> acc_rows;
  for (int c = 0; c < draws.meta.chains; ++c)
    acc_rows.push_back(std::to_string(c) + "," +
                       io::format_double(draws.meta.lambda_acceptance[c]) +
                       "," +
                       io::format_double(draws.meta.phi_acceptance[c]));
  io::write_csv((fs::path(o.out_dir) / "acceptance.csv").string(),
                "chain,lambda_acceptance,phi_acceptance", acc_rows);

  io::RunManifest man;
  man.set("command", "diagnose");
  man.set("library_version", io::library_version());
  man.set("model", mcmc::to_string(draws.meta.variant));
  man.set_file_hash("input.params",
                    (fs::path(o.draws) / "params.csv").string());
  man.write((fs::path(o.out_dir) / "manifest.txt").string());
  write_run_log(o.out_dir, t0);
}

void run_design(const DesignOpts& o) {
  stage("design.build");
  if (o.T < 3) throw Error("design: need T >= 3");
  std::vector<double> support;
  for (int t = 2; t <= o.T; ++t) support.push_back(std::log(t - 1.0));
  const auto basis = design::build_ortho_poly(support, 2);
  std::string header = "t,doy";
  for (int j = 0; j < design::kNumCovariates; ++j)
    header += std::string(",") + design::kCovariateNames[j];
  std::vector<std::string> rows;
  for (int t = 2; t <= o.T; ++t)
    for (const auto& tok : split_list(o.doys)) {
      const int d = std::stoi(tok);
      std::array<double, design::kNumCovariates> row{};
      design::build_design_row({t, d, o.lag1, o.lag2, o.log_dist}, basis, row);
      std::string line = std::to_string(t) + "," + std::to_string(d);
      for (double v : row) line += "," + io::format_double(v);
      rows.push_back(line);
    }
  io::write_csv(o.out, header, rows);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"calendar-day temperature records: indicators, hierarchical "
               "Bayesian model fits, kriged record probabilities"};
  app.require_subcommand(1);

  SimulateOpts sim;
  auto* c_sim = app.add_subcommand("simulate", "simulate record series");
  c_sim->add_option("--model", sim.model, "crm or ldm");
  c_sim->add_option("--c", sim.c, "drift per year (ldm)");
  c_sim->add_option("--sigma", sim.sigma, "noise sd (ldm)");
  c_sim->add_option("--T", sim.T, "series length");
  c_sim->add_option("--reps", sim.reps, "number of series");
  c_sim->add_option("--seed", sim.seed, "rng seed");
  c_sim->add_option("--out-dir", sim.out_dir, "output directory");

  RecordsOpts rec;
  auto* c_rec = app.add_subcommand("records", "extract record indicators");
  c_rec->add_option("--in", rec.in, "temperature csv")->required();
  c_rec->add_option("--stations", rec.stations, "station csv")->required();
  c_rec->add_option("--out", rec.out, "indicator csv path");
  c_rec->add_flag("--calendar-doy", rec.calendar_doy,
                  "doy counts Feb 29; leap days are dropped");

  EdaOpts eda_o;
  auto* c_eda = app.add_subcommand("eda", "exploratory record statistics");
  c_eda->add_option("--in", eda_o.in, "temperature csv")->required();
  c_eda->add_option("--stations", eda_o.stations, "station csv")->required();
  c_eda->add_option("--out-dir", eda_o.out_dir, "output directory");
  c_eda->add_option("--dedupe-region", eda_o.dedupe,
                    "comma list of site ids to drop");
  c_eda->add_option("--tie-rule", eda_o.tie_rule, "exclude or weak");
  c_eda->add_flag("--calendar-doy", eda_o.calendar_doy, "leap-aware doy");

  FitOpts fit;
  auto* c_fit = app.add_subcommand("fit", "fit a record model by mcmc");
  c_fit->add_option("--in", fit.in, "temperature csv")->required();
  c_fit->add_option("--stations", fit.stations, "station csv")->required();
  c_fit->add_option("--config", fit.config, "key = value model config");
  c_fit->add_option("--model", fit.model, "M0..M5 (overrides config)");
  c_fit->add_option("--seed", fit.seed, "rng seed (overrides config)");
  c_fit->add_option("--threads", fit.threads, "thread budget");
  c_fit->add_option("--iterations", fit.iterations, "mcmc sweeps");
  c_fit->add_option("--chains", fit.chains, "number of chains");
  c_fit->add_option("--out-dir", fit.out_dir, "output directory");
  c_fit->add_flag("--calendar-doy", fit.calendar_doy, "leap-aware doy");

  PredictOpts pred;
  auto* c_pred = app.add_subcommand("predict", "posterior-predictive records");
  c_pred->add_option("--draws", pred.draws, "draw directory")->required();
  c_pred->add_option("--grid", pred.grid, "prediction grid csv")->required();
  c_pred->add_option("--t1", pred.t1, "first year of the window");
  c_pred->add_option("--t2", pred.t2, "last year (default fitted T)");
  c_pred->add_option("--l1", pred.l1, "first day of the window");
  c_pred->add_option("--l2", pred.l2, "last day (default n_days)");
  c_pred->add_option("--t-max", pred.t_max, "rollout horizon (default t2)");
  c_pred->add_option("--stats", pred.stats, "comma list: nbar,ratio,ers");
  c_pred->add_option("--block", pred.block, "grid block for ers");
  c_pred->add_option("--seed", pred.seed, "rng seed");
  c_pred->add_option("--threads", pred.threads, "thread budget");
  c_pred->add_option("--out-dir", pred.out_dir, "output directory");

  CrossvalOpts cv;
  auto* c_cv = app.add_subcommand("crossval", "spatial cross-validation");
  c_cv->add_option("--in", cv.in, "temperature csv")->required();
  c_cv->add_option("--stations", cv.stations, "station csv")->required();
  c_cv->add_option("--config", cv.config, "model config");
  c_cv->add_option("--model", cv.model, "M0..M5 (overrides config)");
  c_cv->add_option("--plan", cv.plan, "cv plan csv (group,site)");
  c_cv->add_option("--groups", cv.groups, "groups for a random plan");
  c_cv->add_option("--seed", cv.seed, "rng seed (overrides config)");
  c_cv->add_option("--periods", cv.periods, "year windows, e.g. 2:31,32:62");
  c_cv->add_option("--fold-threads", cv.fold_threads, "concurrent folds");
  c_cv->add_option("--out-dir", cv.out_dir, "output directory");
  c_cv->add_flag("--calendar-doy", cv.calendar_doy, "leap-aware doy");

  DiagnoseOpts diag;
  auto* c_diag = app.add_subcommand("diagnose", "convergence diagnostics");
  c_diag->add_option("--draws", diag.draws, "draw directory")->required();
  c_diag->add_option("--out-dir", diag.out_dir, "output directory");

  DesignOpts des;
  auto* c_des = app.add_subcommand("design", "dump design-matrix rows");
  c_des->add_option("--T", des.T, "number of years");
  c_des->add_option("--doys", des.doys, "comma list of days");
  c_des->add_option("--log-dist", des.log_dist, "log distance to coast");
  c_des->add_option("--lag1", des.lag1, "lag-1 indicator value");
  c_des->add_option("--lag2", des.lag2, "lag-2 indicator value");
  c_des->add_option("--out", des.out, "output csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << '\n';
    return 2;
  }

  try {
    if (*c_sim) run_simulate(sim);
    if (*c_rec) run_records(rec);
    if (*c_eda) run_eda(eda_o);
    if (*c_fit) run_fit(fit);
    if (*c_pred) run_predict(pred);
    if (*c_cv) run_crossval(cv);
    if (*c_diag) run_diagnose(diag);
    if (*c_des) run_design(des);
  } catch (const std::exception& e) {
    std::cerr << "recbayes error [" << g_stage << "]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
