#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "stormfield/enks.hpp"
#include "stormfield/model.hpp"

namespace stormfield {

using StatePath = std::vector<Eigen::VectorXd>;

/// A (possibly truncated) univariate Gaussian full conditional.
struct GaussianFcd {
  double mean = 0.0;
  double precision = 1.0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

/// Bivariate Gaussian full conditional of one velocity nu_t.
struct VelocityFcd {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d precision = Eigen::Matrix2d::Identity();
  bool fixed = false;  // point-mass prior on nu_0
};

// Full conditionals of the static parameters given the states, velocities
// and complete data. Each one collects the terms of the complete-data log
// density that are quadratic in the parameter.
GaussianFcd mu_fcd(const ModelSpec& spec, const StaticParams& params, std::span<const Velocity> velocities,
                   const StatePath& states);
GaussianFcd mu_radar_fcd(const ModelSpec& spec, const StaticParams& params, const ObservationSet& obs,
                         const CompleteData& complete, const StatePath& states);
GaussianFcd alpha_fcd(const ModelSpec& spec, const StaticParams& params, std::span<const Velocity> velocities,
                      const StatePath& states);
GaussianFcd beta_fcd(const ModelSpec& spec, const StaticParams& params, std::span<const Velocity> velocities,
                     const StatePath& states);
VelocityFcd velocity_fcd(const ModelSpec& spec, const StaticParams& params, std::span<const Velocity> velocities,
                         const StatePath& states, int step);

/// Draw mu, mu_r, alpha, beta in that order, each from its full conditional
/// given the values already updated. Throws NumericalError on a
/// non-positive conditional precision.
StaticParams update_static(const ModelSpec& spec, const StaticParams& current, std::span<const Velocity> velocities,
                           const StatePath& states, const ObservationSet& obs, const CompleteData& complete,
                           std::uint64_t seed);

/// Resample every censored entry from N(mean, 1/phi) truncated to (-inf, 0);
/// observed positives are left untouched and missing entries stay NaN.
void update_latent_obs(const ModelSpec& spec, const StaticParams& params, const StatePath& states,
                       const ObservationSet& obs, CompleteData& complete, std::uint64_t seed);

/// One-at-a-time sweep nu_0, ..., nu_T~ through the bivariate full conditionals.
void update_velocities(const ModelSpec& spec, const StaticParams& params, std::vector<Velocity>& velocities,
                       const StatePath& states, std::uint64_t seed);

enum class StateSampler { kEnks, kExact };

struct GibbsConfig {
  int iterations = 2000;
  int burnin = 1000;
  int thin = 1;         // trace thinning after burn-in
  int state_thin = 10;  // keep every state_thin-th stored draw's states
  bool store_paths = false;
  StateSampler sampler = StateSampler::kEnks;
  SmootherConfig smoother;

  void validate() const;
};

struct GibbsState {
  StaticParams params;
  std::vector<Velocity> velocities;
  StatePath states;
  CompleteData complete;
};

/// Terminal quantities of one stored draw, enough to run forecasts.
struct TerminalDraw {
  int iteration = 0;
  StaticParams params;
  Velocity velocity;
  Eigen::VectorXd state;
};

/// Streaming per-(step, cell) moments of theta and Pr(theta > 0).
struct StateAccumulator {
  long count = 0;
  Eigen::MatrixXd mean;      // steps x cells
  Eigen::MatrixXd m2;
  Eigen::MatrixXd positive;  // count of draws with theta > 0

  void add(const StatePath& states, int cells);
};

struct DrawStore {
  int iterations = 0;
  int burnin = 0;
  int thin = 1;
  int state_thin = 1;
  int steps = 0;
  int cells = 0;

  std::vector<int> iteration;
  std::vector<StaticParams> params;
  std::vector<std::vector<Velocity>> velocities;
  std::vector<double> loglik_observed;
  std::vector<double> loglik_complete;
  std::vector<TerminalDraw> terminal;
  std::vector<StatePath> paths;  // only when GibbsConfig::store_paths
  StateAccumulator theta;

  /// Number of post-burn-in draws retained under the thinning settings.
  static int expected_stored(int iterations, int burnin, int thin);
};

/// Starting point: prior means for rho and nu, censored entries set to `fill`.
GibbsState initial_gibbs_state(const ModelSpec& spec, const ObservationSet& obs, double fill = -0.5);

/// One sweep: states, rho, latent observations, velocities.
void gibbs_iteration(const ModelSpec& spec, const ObservationSet& obs, const GibbsConfig& config, GibbsState& state,
                     std::uint64_t seed, int iteration);

/// Full GEnKS run. Deterministic given the seed.
DrawStore run_genks(const ModelSpec& spec, const ObservationSet& obs, const GibbsConfig& config, std::uint64_t seed,
                    const std::function<void(int)>& progress = {});

}  // namespace stormfield
