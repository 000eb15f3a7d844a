#include <benchmark/benchmark.h>

#include "recbayes/krige.hpp"
#include "recbayes/mcmc.hpp"
#include "recbayes/records.hpp"
#include "recbayes/samplers.hpp"

using namespace recbayes;

namespace {

records::TemperaturePanel noise_panel(int n_sites, int T, int nd,
                                      uint64_t seed) {
  records::TemperaturePanel panel;
  RngStream rng(seed);
  for (int s = 0; s < n_sites; ++s) {
    panel.site_ids.push_back("s" + std::to_string(s));
    panel.x_km.push_back(rng.uniform() * 800.0);
    panel.y_km.push_back(rng.uniform() * 800.0);
    panel.dist_coast_km.push_back(1.0 + rng.uniform() * 300.0);
  }
  panel.n_years = T;
  panel.n_days = nd;
  panel.init_storage();
  for (double& v : panel.temps) v = rng.normal();
  return panel;
}

void bm_sample_ks(benchmark::State& state) {
  RngStream rng(7);
  for (auto _ : state) benchmark::DoNotOptimize(samplers::sample_ks(rng));
}
BENCHMARK(bm_sample_ks);

void bm_truncated_normal(benchmark::State& state) {
  RngStream rng(7);
  for (auto _ : state)
    benchmark::DoNotOptimize(samplers::sample_truncated_normal(
        rng, 0.4, 1.3, 0.0, std::numeric_limits<double>::infinity()));
}
BENCHMARK(bm_truncated_normal);

void bm_extract_records(benchmark::State& state) {
  const auto panel = noise_panel(20, 62, 365, 11);
  for (auto _ : state)
    benchmark::DoNotOptimize(records::extract_records(panel));
}
BENCHMARK(bm_extract_records);

void bm_gibbs_sweep(benchmark::State& state) {
  const auto variant = static_cast<mcmc::Variant>(state.range(0));
  const auto panel = noise_panel(12, 20, 30, 3);
  const auto tensor = records::extract_records(panel);
  const auto data = mcmc::build_fit_data(panel, tensor);
  mcmc::ModelSpec spec;
  spec.variant = variant;
  spec.threads = static_cast<int>(state.range(1));
  mcmc::GibbsEngine engine(spec, data, 0);
  int sweep = 1;
  for (auto _ : state) engine.sweep(sweep++);
}
BENCHMARK(bm_gibbs_sweep)
    ->Args({static_cast<long>(mcmc::Variant::kM1), 1})
    ->Args({static_cast<long>(mcmc::Variant::kM4), 1})
    ->Args({static_cast<long>(mcmc::Variant::kM5), 1})
    ->Args({static_cast<long>(mcmc::Variant::kM5), 4});

void bm_krige_system(benchmark::State& state) {
  const long n = state.range(0);
  RngStream rng(5);
  Eigen::MatrixXd obs(n, 2), targets(200, 2);
  for (long i = 0; i < n; ++i)
    obs.row(i) << rng.uniform() * 800, rng.uniform() * 800;
  for (long i = 0; i < 200; ++i)
    targets.row(i) << rng.uniform() * 800, rng.uniform() * 800;
  for (auto _ : state)
    benchmark::DoNotOptimize(krige::build_krige_system(obs, targets, 0.01));
}
BENCHMARK(bm_krige_system)->Arg(20)->Arg(40);

void bm_krige_draw(benchmark::State& state) {
  RngStream rng(5);
  Eigen::MatrixXd obs(40, 2), targets(200, 2);
  for (long i = 0; i < 40; ++i)
    obs.row(i) << rng.uniform() * 800, rng.uniform() * 800;
  for (long i = 0; i < 200; ++i)
    targets.row(i) << rng.uniform() * 800, rng.uniform() * 800;
  const auto sys = krige::build_krige_system(obs, targets, 0.01);
  Eigen::VectorXd w(40);
  for (long i = 0; i < 40; ++i) w[i] = rng.normal();
  for (auto _ : state)
    benchmark::DoNotOptimize(krige::krige_w(rng, sys, w, 0.0, 4.0));
}
BENCHMARK(bm_krige_draw);

}  // namespace

BENCHMARK_MAIN();
