#include <benchmark/benchmark.h>

#include "flowte/admm.hpp"
#include "flowte/baselines.hpp"
#include "flowte/model.hpp"
#include "flowte/paths.hpp"
#include "flowte/rl.hpp"
#include "flowte/traffic.hpp"

using namespace flowte;

namespace {

/// Calibrated B4 interval shared by every benchmark.
const TeInstance& b4_instance() {
  static const TeInstance inst = [] {
    const Topology topo = topologies::b4_like();
    const Trace trace = calibrate_scale(topo, generate_trace(topo, 50, 1)).trace;
    return TeInstance::create(topo, trace[25]);
  }();
  return inst;
}

}  // namespace

static void BM_KShortestPaths(benchmark::State& state) {
  const Topology topo = topologies::random_connected(static_cast<std::size_t>(state.range(0)), 8, 1);
  for (auto _ : state) benchmark::DoNotOptimize(k_shortest_paths(topo, 4));
}
BENCHMARK(BM_KShortestPaths)->Arg(12)->Arg(24)->Arg(48);

static void BM_LpAll(benchmark::State& state) {
  const TeInstance& inst = b4_instance();
  for (auto _ : state) benchmark::DoNotOptimize(solve_lp_all(inst));
}
BENCHMARK(BM_LpAll)->Unit(benchmark::kMillisecond);

static void BM_LpTop(benchmark::State& state) {
  const TeInstance& inst = b4_instance();
  for (auto _ : state) benchmark::DoNotOptimize(solve_lp_top(inst, 0.1));
}
BENCHMARK(BM_LpTop)->Unit(benchmark::kMillisecond);

static void BM_Allocate(benchmark::State& state) {
  const TeInstance& inst = b4_instance();
  const ModelParameters model = ModelParameters::create(inst.topology());
  for (auto _ : state) benchmark::DoNotOptimize(allocate(inst, model));
}
BENCHMARK(BM_Allocate)->Unit(benchmark::kMicrosecond);

static void BM_ForwardBackward(benchmark::State& state) {
  const TeInstance& inst = b4_instance();
  const ModelParameters model = ModelParameters::create(inst.topology());
  for (auto _ : state) {
    const ModelPass pass = model_forward(inst, model, true);
    benchmark::DoNotOptimize(surrogate_loss_gradient(inst, pass, model));
  }
}
BENCHMARK(BM_ForwardBackward)->Unit(benchmark::kMicrosecond);

static void BM_AdmmSweep(benchmark::State& state) {
  const TeInstance& inst = b4_instance();
  const AdmmState start = warm_start(inst, pin_shortest_paths(inst));
  for (auto _ : state) benchmark::DoNotOptimize(iterate(start, inst));
}
BENCHMARK(BM_AdmmSweep)->Unit(benchmark::kMicrosecond);

static void BM_FeasibleFlow(benchmark::State& state) {
  const TeInstance& inst = b4_instance();
  const FlowAllocation pin = pin_shortest_paths(inst);
  for (auto _ : state) benchmark::DoNotOptimize(feasible_total_flow(inst, pin));
}
BENCHMARK(BM_FeasibleFlow);
BENCHMARK_MAIN();
