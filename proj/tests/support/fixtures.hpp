#pragma once

#include <cstdint>
#include <vector>

#include "stormfield/model.hpp"
#include "stormfield/simulator.hpp"

namespace fixture {

inline stormfield::ModelSpec small_spec(int n, int times, int imputed = 0, std::vector<int> gauges = {}) {
  stormfield::Hyperparams hy;
  hy.imputed_steps = imputed;
  return stormfield::ModelSpec{stormfield::Lattice(stormfield::GridSpec{n, 500.0}),
                               stormfield::time_map(times, imputed), hy, stormfield::Priors{}, std::move(gauges)};
}

inline stormfield::StaticParams truth() { return {0.2, -0.1, 0.8, 0.1}; }

/// Simulated paths and data for a spec.
inline stormfield::SimulationOutput simulate(const stormfield::ModelSpec& spec, const stormfield::StaticParams& p,
                                             std::uint64_t seed) {
  return stormfield::simulate_observations(stormfield::simulate_system(spec, p, seed), spec, p, seed + 1);
}

}  // namespace fixture
