#include <benchmark/benchmark.h>

#include <vector>

#include "stormfield/enks.hpp"
#include "stormfield/gibbs.hpp"
#include "stormfield/lattice.hpp"
#include "stormfield/simulator.hpp"

using namespace stormfield;

namespace {

ModelSpec make_spec(int n, int times, int gauges) {
  return ModelSpec{Lattice(GridSpec{n, 500.0}), time_map(times, 0), Hyperparams{}, Priors{},
                   place_gauges(n * n, gauges, 3)};
}

SimulationOutput make_data(const ModelSpec& spec) {
  return simulate_observations(simulate_system(spec, StaticParams{}, 1), spec, StaticParams{}, 2);
}

}  // namespace

static void BM_StencilApply(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Lattice lattice(GridSpec{n, 500.0});
  const StencilWeights w = theta_stencil(0.8, 0.1, Velocity{0.02, -0.01});
  std::vector<double> in(static_cast<std::size_t>(n * n), 1.0), out(in.size());
  for (auto _ : state) {
    lattice.apply(w, in, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(BM_StencilApply)->Arg(16)->Arg(72);

static void BM_EnksDraw(benchmark::State& state) {
  const ModelSpec spec = make_spec(16, 6, 5);
  const SimulationOutput sim = make_data(spec);
  SmootherConfig cfg;
  cfg.ensemble_size = static_cast<int>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    const SmootherResult r =
        enks_draw(spec, StaticParams{}, sim.paths.velocities, sim.observed, sim.complete, cfg, ++seed);
    benchmark::DoNotOptimize(r.member);
  }
}
BENCHMARK(BM_EnksDraw)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_GibbsIteration(benchmark::State& state) {
  const ModelSpec spec = make_spec(16, 6, 5);
  const SimulationOutput sim = make_data(spec);
  GibbsConfig cfg;
  cfg.smoother.ensemble_size = 100;
  GibbsState gs = initial_gibbs_state(spec, sim.observed);
  int iteration = 0;
  for (auto _ : state) gibbs_iteration(spec, sim.observed, cfg, gs, 11, iteration++);
}
BENCHMARK(BM_GibbsIteration)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
