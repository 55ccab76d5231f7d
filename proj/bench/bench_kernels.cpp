// Kernels of one MPC instant on the bundled scenario. The workers argument
// of the parallel benchmarks is 1 for the serial path.

#include <benchmark/benchmark.h>

#include "emgrid/parallel.hpp"
#include "emgrid/scenario_io.hpp"

using namespace emgrid;

namespace {

struct Bundled {
  Scenario sc;
  DisturbanceSeries series;
  StepInstance inst;

  Bundled() {
    sc = load_scenario(std::string(EMGRID_DATA_DIR) + "/microgrids4.json");
    series = load_series(std::string(EMGRID_DATA_DIR) + "/microgrids4_series.csv", sc);
    inst.graph = sc.grid;
    inst.gamma = sc.solver.gamma;
    inst.ts = sc.solver.ts;
    for (int j = 0; j < sc.size(); ++j)
      inst.mgs.push_back({sc.microgrids[j], persistence_forecast(series, j, 1, sc.solver.horizon),
                          sc.initial_storage[j]});
  }
};

const Bundled& bundled() {
  static const Bundled b;
  return b;
}

void BM_RelaxedQp(benchmark::State& state) {
  const auto& b = bundled();
  const auto& mg = b.inst.mgs[0];
  const auto prob = build_islanded_problem(
      mg, SwitchBounds::relaxed(static_cast<int>(mg.forecast.size()), 1), b.inst.gamma, b.inst.ts);
  for (auto _ : state) {
    QpSolver solver;
    benchmark::DoNotOptimize(solver.solve(prob.qp));
  }
}
BENCHMARK(BM_RelaxedQp)->Unit(benchmark::kMicrosecond);

void BM_StageOneMg(benchmark::State& state) {
  const auto& mg = bundled().inst.mgs[state.range(0)];
  for (auto _ : state) benchmark::DoNotOptimize(solve_islanded(mg));
}
BENCHMARK(BM_StageOneMg)->Arg(0)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_StageOneAll(benchmark::State& state) {
  const auto& b = bundled();
  IslandedOptions opt;
  for (auto _ : state) {
    std::vector<IslandedSolution> out(b.inst.mgs.size());
    parallel_for(
        static_cast<int>(out.size()), [&](int j) { out[j] = solve_islanded(b.inst.mgs[j], opt); },
        static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_StageOneAll)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Central(benchmark::State& state) {
  const auto& b = bundled();
  const auto isl = solve_islanded_all(b.inst.mgs, {});
  for (auto _ : state) benchmark::DoNotOptimize(solve_central_convex(b.inst, isl, {}));
}
BENCHMARK(BM_Central)->Unit(benchmark::kMillisecond);

void BM_ConsensusAl(benchmark::State& state) {
  const auto& b = bundled();
  const auto isl = solve_islanded_all(b.inst.mgs, {});
  AlSettings al{b.sc.solver.rho, b.sc.solver.tau, b.sc.solver.eps_term, b.sc.solver.nu_max,
                static_cast<int>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(run_consensus_al(b.inst, isl, al));
}
BENCHMARK(BM_ConsensusAl)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
