#include <benchmark/benchmark.h>

#include "dlalab/coupling.hpp"
#include "dlalab/harmonic.hpp"
#include "dlalab/process.hpp"
#include "dlalab/walk.hpp"

using namespace dlalab;

static void BM_SquareExitSample(benchmark::State& state) {
  const SquareExitLaw law(state.range(0));
  RngStream rng(1, 0);
  for (auto _ : state) benchmark::DoNotOptimize(law.sample(rng));
}
BENCHMARK(BM_SquareExitSample)->Arg(4)->Arg(64)->Arg(1024);

static void BM_SquareExitLawBuild(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(SquareExitLaw(state.range(0)).total_mass());
}
BENCHMARK(BM_SquareExitLawBuild)->Arg(16)->Arg(256);

// One walker from radius 4N onto D_N, with and without square jumps.
static void BM_WalkToSegment(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  const bool accelerate = state.range(1) != 0;
  ObstacleIndex idx;
  const auto sites = SegmentSpec{n}.sites();
  idx.insert(sites, SiteTag::Target);
  const auto ring = LaunchRing::get({4 * n, LaunchDistribution::UniformOnRing});
  const WalkOptions opts =
      walk_options_for(ring, accelerate ? AccelerationPolicy::square_jump() : AccelerationPolicy::none(),
                       kDefaultWalkBudget, ReentryMode::PoissonKernel, 2.0);
  std::uint64_t i = 0;
  for (auto _ : state) {
    RngStream rng(2, i++);
    benchmark::DoNotOptimize(run_to_absorption(ring->launch(rng), idx, opts, rng));
  }
}
BENCHMARK(BM_WalkToSegment)->Args({16, 0})->Args({16, 1})->Args({256, 0})->Args({256, 1});

static void BM_ExactSegment(benchmark::State& state) {
  const SiteSet a = to_set(SegmentSpec{state.range(0)}.sites());
  for (auto _ : state) benchmark::DoNotOptimize(exact_edge_harmonic(a, {}).total_mass());
}
BENCHMARK(BM_ExactSegment)->Arg(2)->Arg(8)->Unit(benchmark::kMillisecond);

static void BM_IntermediateRun(benchmark::State& state) {
  const ProcessConfig cfg = ProcessConfig::intermediate(8, state.range(0));
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_process(cfg, 3, i++).added);
}
BENCHMARK(BM_IntermediateRun)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

static void BM_CoupledRun(benchmark::State& state) {
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_coupled(8, 16, state.range(0), {}, 4, i++).steps);
}
BENCHMARK(BM_CoupledRun)->Arg(128)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
