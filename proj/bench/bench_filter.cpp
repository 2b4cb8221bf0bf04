// Serial vs OpenMP filter steps, and shared vs per-particle Kalman work.

#include <benchmark/benchmark.h>

#include "rbmcda/parallel.hpp"
#include "rbmcda/pmcmc.hpp"
#include "rbmcda/simulate.hpp"

using namespace rbmcda;

namespace {

const Scenario& scenario() {
  static const Scenario s = [] {
    ScenarioConfig c;
    c.n_targets = 10;
    c.n_obs = 60;
    c.seed = 2024;
    return simulate_scenario(c);
  }();
  return s;
}

void run_filter(benchmark::State& state, ExecutionMode mode, bool share) {
  FilterConfig fc;
  fc.execution = mode;
  fc.share_computation = share;
  fc.parallel_min_groups = 1;
  const auto ctx = make_context(scenario(), fc);
  const int n = static_cast<int>(state.range(0));
  Rng rng(1);
  for (auto _ : state) {
    auto set = rbmcda_filter(ctx, ModelParams{}, n, rng);
    benchmark::DoNotOptimize(set.log_marginal_lik);
  }
  state.SetItemsProcessed(state.iterations() * n * ctx.size());
  state.counters["threads"] = mode == ExecutionMode::parallel ? max_threads() : 1;
}

void BM_FilterSerial(benchmark::State& s) { run_filter(s, ExecutionMode::serial, true); }
void BM_FilterParallel(benchmark::State& s) { run_filter(s, ExecutionMode::parallel, true); }
void BM_FilterSerialNoSharing(benchmark::State& s) { run_filter(s, ExecutionMode::serial, false); }
void BM_FilterParallelNoSharing(benchmark::State& s) { run_filter(s, ExecutionMode::parallel, false); }

void BM_PgibbsIteration(benchmark::State& state) {
  const auto ctx = make_context(scenario(), FilterConfig{});
  SamplerConfig cfg;
  cfg.iterations = 10;
  cfg.n_particles = static_cast<int>(state.range(0));
  Rng rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(pgibbs(ctx, ModelParams{}, cfg, PriorSpec{}, rng).rows.back());
  state.SetItemsProcessed(state.iterations() * cfg.iterations);
}

}  // namespace

BENCHMARK(BM_FilterSerial)->Arg(16)->Arg(128)->Arg(1024)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_FilterParallel)->Arg(16)->Arg(128)->Arg(1024)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_FilterSerialNoSharing)->Arg(16)->Arg(128)->Arg(1024)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_FilterParallelNoSharing)->Arg(16)->Arg(128)->Arg(1024)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_PgibbsIteration)->Arg(5)->Arg(100)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
