#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "recbayes/mcmc.hpp"
#include "recbayes/records.hpp"
#include "recbayes/rng.hpp"

namespace recbayes::krige {

// Target cells for spatial prediction (projected km coordinates).  Block
// labels partition the grid into named subregions; an empty label on a query
// selects every cell.
struct PredictionGrid {
  std::vector<std::string> cell_ids;
  std::vector<double> x_km, y_km, dist_coast_km;
  std::vector<std::string> block;

  int size() const { return static_cast<int>(cell_ids.size()); }
  void validate() const;
  std::vector<int> block_cells(const std::string& label) const;
};

// element-wise sig0sq * exp(-phi * d) between two point sets (rows = points,
// cols = x/y in km)
Eigen::MatrixXd exp_covariance(const Eigen::MatrixXd& coords_a,
                               const Eigen::MatrixXd& coords_b, double sig0sq,
                               double phi);

// Conditional-normal machinery for interpolating a surface from the observed
// sites to the targets, built once per posterior draw (the decay changes per
// draw, the variance only rescales).  Targets that coincide with an observed
// site are reproduced exactly with zero noise.
struct KrigeSystem {
  Eigen::MatrixXd weights;     // n_obs x m, R_ss^-1 R_st
  Eigen::MatrixXd noise_root;  // m x m, B with B B^T = conditional correlation
  std::vector<int> exact_obs;  // per target: coincident observed index or -1
};

KrigeSystem build_krige_system(const Eigen::MatrixXd& obs_xy,
                               const Eigen::MatrixXd& target_xy, double phi);

// joint conditional draw at the targets given surface values at the observed
// sites, for a surface with constant mean `mean` and variance sig0sq
Eigen::VectorXd krige_w(RngStream& rng, const KrigeSystem& sys,
                        const Eigen::VectorXd& w_obs, double mean,
                        double sig0sq);

// Posterior-predictive record indicators and probabilities on a grid.
// Draws are flattened chain-major; year 1 is the trivial record year.
struct PredictiveField {
  int n_draws = 0, T = 0, n_days = 0, n_cells = 0;
  std::vector<std::string> cell_ids, block;
  std::vector<double> p;
  std::vector<int8_t> ind;

  size_t idx(int k, int t, int d, int c) const {
    return ((static_cast<size_t>(k) * T + (t - 1)) * n_days + (d - 1)) *
               n_cells +
           c;
  }
  double prob(int k, int t, int d, int c) const { return p[idx(k, t, d, c)]; }
  int indicator(int k, int t, int d, int c) const {
    return ind[idx(k, t, d, c)];
  }
};

// Dynamic rollout of the indicator process on the grid for years 1..t_max:
// each cell's lags come from its own simulated history, year 1 is all ones,
// and day-1/2 probabilities use the initial-day submodels.
PredictiveField simulate_predictive(const mcmc::PosteriorDraws& draws,
                                    const PredictionGrid& grid, int t_max,
                                    uint64_t seed, int threads = 1);

// One-step-ahead probabilities at held-out sites: lags are the observed
// indicators of the held-out series (tied lags resampled Bernoulli(1/r) once
// per draw); no indicator chain is simulated.  p covers t = 2..T.
struct OneStepField {
  int n_draws = 0, T = 0, n_days = 0, n_sites = 0;
  std::vector<double> p;

  size_t idx(int k, int t, int d, int s) const {
    return ((static_cast<size_t>(k) * (T - 1) + (t - 2)) * n_days + (d - 1)) *
               n_sites +
           s;
  }
  double prob(int k, int t, int d, int s) const { return p[idx(k, t, d, s)]; }
};

OneStepField one_step_ahead(const mcmc::PosteriorDraws& draws,
                            const PredictionGrid& sites,
                            const records::RecordTensor& obs, uint64_t seed,
                            int threads = 1);

// Per-draw summaries of the simulated field.
// average-per-day record count over a year x day window at one cell
std::vector<double> nbar(const PredictiveField& field, int t1, int t2, int l1,
                         int l2, int cell);
// nbar divided by its expectation under a stationary climate
std::vector<double> ratio(const PredictiveField& field, int t1, int t2, int l1,
                          int l2, int cell);
// draws x cells matrix of nbar values (input to area summaries)
Eigen::MatrixXd nbar_by_cell(const PredictiveField& field, int t1, int t2,
                             int l1, int l2);
// fraction of the block recording on day l of year t
std::vector<double> ers(const PredictiveField& field, int t, int l,
                        const std::vector<int>& cells);
// ers averaged over a set of days (callers report t * ers_bar)
std::vector<double> ers_bar(const PredictiveField& field, int t,
                            const std::vector<int>& days,
                            const std::vector<int>& cells);

enum class ExceedMode { kMean, kPointwiseQ05, kPerDraw };

// fraction of cells whose statistic exceeds a threshold; kMean and
// kPointwiseQ05 summarize across draws first (scalar result), kPerDraw
// returns one fraction per draw
std::vector<double> area_fraction_exceeding(const Eigen::MatrixXd& stat,
                                            double threshold, ExceedMode mode);

}  // namespace recbayes::krige
