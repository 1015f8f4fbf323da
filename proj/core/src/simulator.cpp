#include "stormfield/simulator.hpp"

#include <cmath>
#include <numeric>

#include "stormfield/errors.hpp"
#include "stormfield/random.hpp"

namespace stormfield {
namespace {

double sd_from_precision(double precision) { return std::isinf(precision) ? 0.0 : 1.0 / std::sqrt(precision); }

}  // namespace

SystemPaths simulate_system(const ModelSpec& spec, const StaticParams& params, std::uint64_t seed) {
  spec.validate();
  params.validate();
  const int n_cells = spec.cells();
  const int steps = spec.time.steps();
  const Priors& pr = spec.priors;
  const Hyperparams& hy = spec.hyper;

  SystemPaths out;
  out.states.assign(static_cast<std::size_t>(steps), Eigen::VectorXd(spec.state_dim()));
  out.velocities.resize(static_cast<std::size_t>(steps));

  {
    Rng rng(seed, Stream::kSimulateInitial);
    Eigen::VectorXd& x0 = out.states.front();
    const double sd_theta = std::sqrt(pr.theta0.variance);
    const double sd_source = std::sqrt(pr.source0.variance);
    for (int r = 0; r < n_cells; ++r) x0[r] = params.mu + pr.theta0.mean + sd_theta * rng.normal();
    for (int r = 0; r < n_cells; ++r) x0[n_cells + r] = pr.source0.mean + sd_source * rng.normal();
    const double sd_nu = std::sqrt(pr.nu0_variance);
    out.velocities.front() = {pr.nu0_mean.x + sd_nu * rng.normal(), pr.nu0_mean.y + sd_nu * rng.normal()};
  }

  const double sd_theta = sd_from_precision(hy.theta_step_precision());
  const double sd_source = sd_from_precision(hy.source_step_precision());
  const double sd_nu = sd_from_precision(hy.phi_nu);
  for (int s = 1; s < steps; ++s) {
    Rng rng(seed, Stream::kSimulateSystem, {static_cast<std::uint64_t>(s)});
    const auto prev = static_cast<std::size_t>(s - 1);
    Eigen::VectorXd& x = out.states[static_cast<std::size_t>(s)];
    propagate_mean(spec, params, out.velocities[prev], out.states[prev], x);
    for (int r = 0; r < n_cells; ++r) x[r] += sd_theta * rng.normal();
    for (int r = 0; r < n_cells; ++r) x[n_cells + r] += sd_source * rng.normal();
    const Velocity& v = out.velocities[prev];
    out.velocities[static_cast<std::size_t>(s)] = {hy.alpha_nu * v.x + sd_nu * rng.normal(),
                                                   hy.alpha_nu * v.y + sd_nu * rng.normal()};
  }
  return out;
}

SimulationOutput simulate_observations(SystemPaths paths, const ModelSpec& spec, const StaticParams& params,
                                       std::uint64_t seed) {
  const TimeGrid& tg = spec.time;
  if (static_cast<int>(paths.states.size()) != tg.steps()) {
    throw ConfigError("state paths do not cover the augmented time grid");
  }
  const int n_cells = spec.cells();
  const int n_gauges = static_cast<int>(spec.gauge_cells.size());
  const double sd_radar = sd_from_precision(spec.hyper.phi_radar);
  const double sd_gauge = sd_from_precision(spec.hyper.phi_gauge);

  SimulationOutput out;
  out.observed = ObservationSet::empty(tg.times, n_cells, spec.gauge_cells);
  out.complete.resize(static_cast<std::size_t>(tg.times));
  for (int k = 0; k < tg.times; ++k) {
    Rng rng(seed, Stream::kSimulateObservations, {static_cast<std::uint64_t>(k)});
    const Eigen::VectorXd& x = paths.states[static_cast<std::size_t>(tg.obs_step[static_cast<std::size_t>(k)])];
    Eigen::VectorXd& y = out.complete[static_cast<std::size_t>(k)];
    y.resize(n_cells + n_gauges);
    for (int r = 0; r < n_cells; ++r) y[r] = x[r] + params.mu_radar + sd_radar * rng.normal();
    for (int g = 0; g < n_gauges; ++g) {
      y[n_cells + g] = x[spec.gauge_cells[static_cast<std::size_t>(g)]] + sd_gauge * rng.normal();
    }
    for (int c = 0; c < n_cells + n_gauges; ++c) {
      if (y[c] > 0.0) {
        out.observed.set(k, c, ObsFlag::kPositive, y[c]);
      } else {
        out.observed.set(k, c, ObsFlag::kCensored, 0.0);
      }
    }
  }
  out.paths = std::move(paths);
  return out;
}

std::vector<int> place_gauges(int cells, int count, std::uint64_t seed) {
  if (count < 0 || count > cells) throw ConfigError("cannot place that many gauges on the lattice");
  std::vector<int> pool(static_cast<std::size_t>(cells));
  std::iota(pool.begin(), pool.end(), 0);
  Rng rng(seed, Stream::kSimulateGauges);
  for (int g = 0; g < count; ++g) {
    const auto pick = static_cast<std::size_t>(g) + static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(cells - g)));
    std::swap(pool[static_cast<std::size_t>(g)], pool[pick]);
  }
  pool.resize(static_cast<std::size_t>(count));
  return pool;
}

}  // namespace stormfield
