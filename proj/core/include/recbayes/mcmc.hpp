#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "recbayes/design.hpp"
#include "recbayes/records.hpp"
#include "recbayes/samplers.hpp"

namespace recbayes::mcmc {

// Nested model variants.  M5 is the full model; the others are structural
// degenerations sharing the same machinery:
//   M0: eta = -log(t-1), closed form
//   M1: eta = x beta
//   M2: eta = x beta + w(s)                      (static spatial surface)
//   M3: eta = x beta + w(s) + w_t                (annual means)
//   M4: eta = x beta + w(s) + w_tl               (daily means)
//   M5: eta = x beta + w_tl(s)                   (daily spatial surfaces)
enum class Variant { kM0, kM1, kM2, kM3, kM4, kM5 };

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

struct Priors {
  double beta_sd = 100.0;  // N(0, beta_sd^2) on regression coefficients
  double a_sigma = 2.0, b_sigma = 1.0;  // IG on variances
  double a_phi = 2.0, b_phi = 1.0;      // Gamma on the decay phi0
};

struct ModelSpec {
  Variant variant = Variant::kM5;
  int iterations = 2000;
  int burnin = -1;        // < 0: first half
  int target_draws = 500; // retained per chain after thinning
  int chains = 2;
  uint64_t seed = 1;
  int threads = 1;
  Priors priors;
  bool keep_latent = false;        // retain Y/lambda draws (debug)
  bool intercept_in_beta = false;  // uncentered intercept (M1 only; testing)
  double phi_init = 0.0;           // <= 0: 3 / median pairwise distance
  double phi_proposal_log_sd = -1.0;
};

// Immutable data assembled once per fit: distances, design bases and the
// scaling specs (fitted with tied indicators treated as zero).
struct FitData {
  int n_sites = 0, T = 0, n_days = 0;
  Eigen::MatrixXd dist;
  std::vector<double> log_dist;
  records::RecordTensor obs;
  design::OrthoPolyBasis basis;
  design::ScalingSpec scale_main;   // 21 columns, intercept first
  design::ScalingSpec scale_init1, scale_init2;  // 3 columns
  double median_dist = 0.0;
  // station metadata carried through to the draws
  std::vector<std::string> site_ids;
  std::vector<double> x_km, y_km, dist_coast;
  int first_year = 0;

  int n_day_cells() const { return (T - 1) * n_days; }  // (t,d), t = 2..T
  int day_cell(int t, int d) const { return (t - 2) * n_days + (d - 1); }
  size_t cell(int s, int t, int d) const {
    return static_cast<size_t>(day_cell(t, d)) * n_sites + s;
  }
};

FitData build_fit_data(const records::TemperaturePanel& panel,
                       const records::RecordTensor& obs);

struct ChainState {
  Eigen::VectorXd beta;            // main covariate coefficients
  Eigen::Vector2d beta_d1{0, 0}, beta_d2{0, 0};  // (trend1, lag)
  double beta0 = 0, beta0_d1 = 0, beta0_d2 = 0;
  std::vector<double> y, lam;      // latent, per modeled cell
  std::vector<int8_t> work_ind;    // working indicators, [s][t][d] incl t=1
  Eigen::MatrixXd w_daily;         // M5: n_day_cells x n_sites
  Eigen::VectorXd v_static;        // M2-M4: n_sites
  std::vector<double> wm;          // M4/M5 daily means per day cell
  std::vector<double> w_annual;    // M3 annual means, t = 2..T
  double sig0sq = 1, sig1sq = 1;
  double sig0sq_d1 = 1, sig1sq_d1 = 1, sig0sq_d2 = 1, sig1sq_d2 = 1;
  double phi = 0.0;
  samplers::AdaptiveRWState phi_adapt;
};

struct DrawsMeta {
  Variant variant = Variant::kM5;
  int T = 0, n_days = 0, n_sites = 0, chains = 0, draws_per_chain = 0;
  int iterations = 0, burnin = 0, thin = 1;
  uint64_t seed = 0;
  Priors priors;
  std::vector<std::string> site_ids;
  std::vector<double> x_km, y_km, dist_coast, log_dist;
  design::OrthoPolyBasis basis;
  design::ScalingSpec scale_main, scale_init1, scale_init2;
  int first_year = 0;
  std::vector<double> lambda_acceptance, phi_acceptance;  // per chain
};

struct PosteriorDraws {
  DrawsMeta meta;
  std::vector<std::string> param_names;
  std::vector<Eigen::MatrixXd> params;  // per chain: draws x params
  // spatial surfaces per chain/draw: M5 rows = day cells; M2-M4 a single row
  std::vector<std::vector<Eigen::MatrixXd>> surfaces;
  // daily means per chain/draw (M4/M5): one value per day cell
  std::vector<std::vector<Eigen::VectorXd>> day_means;
  // latent augmentation variables, retained only when keep_latent is set
  std::vector<std::vector<Eigen::VectorXd>> latent_y, latent_lam;

  int n_params() const { return static_cast<int>(param_names.size()); }
  int param_index(const std::string& name) const;
  bool has_surfaces() const { return !surfaces.empty() && !surfaces[0].empty(); }
};

// One chain's Gibbs sampler.  Steps are public so tests can exercise the
// full conditionals in isolation.
class GibbsEngine {
 public:
  GibbsEngine(const ModelSpec& spec, const FitData& data, int chain_index);
  ~GibbsEngine();

  void sweep(int sweep_index);
  void freeze_adaptation();

  void step_ties(RngStream& rng);
  void step_latent(RngStream& rng);
  void step_lambda(RngStream& rng);
  void step_beta(RngStream& rng);
  void step_surfaces(RngStream& rng);
  void step_means(RngStream& rng);
  void step_phi(RngStream& rng);
  void step_variances(RngStream& rng);

  ChainState& state() { return st_; }
  const ChainState& state() const { return st_; }
  const FitData& data() const { return data_; }
  const ModelSpec& spec() const { return spec_; }

  // current linear predictor at an observed cell (t >= 2)
  double eta(int s, int t, int d) const;
  // random-effect + intercept contribution at an observed cell
  double random_part(int s, int t, int d) const;
  // refresh the cached design rows / fixed-effect part (after tie updates
  // or external state edits)
  void refresh_cache();

  double lambda_acceptance() const;
  double phi_acceptance() const { return st_.phi_adapt.acceptance_rate(); }
  void reset_acceptance_counters();

  Eigen::VectorXd param_vector() const;
  static std::vector<std::string> param_names(const ModelSpec& spec,
                                              const FitData& data);
  RngStream stream_for(int sweep_index, int step_tag) const;

 private:
  struct Impl;
  const ModelSpec spec_;
  const FitData& data_;
  ChainState st_;
  std::unique_ptr<Impl> impl_;
};

PosteriorDraws run_chain(const ModelSpec& spec, const FitData& data);
PosteriorDraws run_chain(const ModelSpec& spec,
                         const records::TemperaturePanel& panel,
                         const records::RecordTensor& obs);

}  // namespace recbayes::mcmc
