#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "stormfield/model.hpp"

namespace stormfield {

/// Latent paths over the augmented time axis 0..T~.
struct SystemPaths {
  std::vector<Eigen::VectorXd> states;  // x_s = (theta_s, S_s)
  std::vector<Velocity> velocities;     // nu_s
};

struct SimulationOutput {
  SystemPaths paths;
  CompleteData complete;     // uncensored observations per observation time
  ObservationSet observed;   // censored at zero
};

/// Draw initial conditions from the priors and run the system recursion
/// forward. Deterministic given the seed.
SystemPaths simulate_system(const ModelSpec& spec, const StaticParams& params, std::uint64_t seed);

/// Draw radar and gauge observations at each observation time and censor
/// them at zero.
SimulationOutput simulate_observations(SystemPaths paths, const ModelSpec& spec, const StaticParams& params,
                                       std::uint64_t seed);

/// `count` distinct cells chosen uniformly at random.
std::vector<int> place_gauges(int cells, int count, std::uint64_t seed);

}  // namespace stormfield
