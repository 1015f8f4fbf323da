#include "stormfield/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "stormfield/analysis.hpp"
#include "stormfield/errors.hpp"
#include "stormfield/random.hpp"
#include "stormfield/truncated_normal.hpp"

namespace stormfield {
namespace {

using Eigen::VectorXd;

std::span<const double> view(const VectorXd& v, int offset, int count) {
  return {v.data() + offset, static_cast<std::size_t>(count)};
}
std::span<double> view(VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

void require_path(const ModelSpec& spec, std::span<const Velocity> velocities, const StatePath& states) {
  const auto steps = static_cast<std::size_t>(spec.time.steps());
  if (states.size() != steps || velocities.size() != steps) {
    throw ConfigError("state or velocity path does not cover the time grid");
  }
}

double step_precision(const ModelSpec& spec) {
  const double p = spec.hyper.theta_step_precision();
  if (!std::isfinite(p)) throw ConfigError("static-parameter updates need a finite phi_theta");
  return p;
}

GaussianFcd finish(double precision, double linear, const char* name) {
  if (!(precision > 0.0) || !std::isfinite(precision)) {
    throw NumericalError(std::string("non-positive full-conditional precision for ") + name);
  }
  GaussianFcd fcd;
  fcd.precision = precision;
  fcd.mean = linear / precision;
  if (!std::isfinite(fcd.mean)) throw NumericalError(std::string("non-finite full-conditional mean for ") + name);
  return fcd;
}

// Per-transition work arrays reused across steps.
struct Scratch {
  VectorXd d, z, a, b;
  explicit Scratch(int n) : d(n), z(n), a(n), b(n) {}
};

// d = theta_{s-1} - mu, z = theta_s - mu - S_{s-1}.
void transition_terms(const ModelSpec& spec, double mu, const StatePath& states, int s, Scratch& w) {
  const int n = spec.cells();
  const VectorXd& prev = states[static_cast<std::size_t>(s - 1)];
  const VectorXd& next = states[static_cast<std::size_t>(s)];
  w.d = prev.head(n).array() - mu;
  w.z = next.head(n).array() - mu;
  w.z -= prev.tail(n);
}

}  // namespace

GaussianFcd mu_fcd(const ModelSpec& spec, const StaticParams& params, std::span<const Velocity> velocities,
                   const StatePath& states) {
  require_path(spec, velocities, states);
  const int n = spec.cells();
  const Priors& pr = spec.priors;
  double precision = 1.0 / pr.mu.variance;
  double linear = pr.mu.mean / pr.mu.variance;

  if (!(pr.theta0.variance > 0.0)) throw ConfigError("mu update needs a positive theta_0 prior variance");
  precision += n / pr.theta0.variance;
  linear += (states.front().head(n).array() - pr.theta0.mean).sum() / pr.theta0.variance;

  // theta_s - G theta_{s-1} - S_{s-1} = mu (1 - alpha) 1 + eps since G 1 = alpha 1.
  const double phi = step_precision(spec);
  const double c = 1.0 - params.alpha;
  VectorXd g(n);
  for (int s = 1; s < spec.time.steps(); ++s) {
    const VectorXd& prev = states[static_cast<std::size_t>(s - 1)];
    const VectorXd& next = states[static_cast<std::size_t>(s)];
    spec.lattice.apply(theta_stencil(params.alpha, params.beta, velocities[static_cast<std::size_t>(s - 1)]),
                       view(prev, 0, n), view(g));
    const double r_sum = (next.head(n) - g - prev.tail(n)).sum();
    precision += phi * n * c * c;
    linear += phi * c * r_sum;
  }
  return finish(precision, linear, "mu");
}

GaussianFcd mu_radar_fcd(const ModelSpec& spec, const StaticParams&, const ObservationSet& obs,
                         const CompleteData& complete, const StatePath& states) {
  const Priors& pr = spec.priors;
  double precision = 1.0 / pr.mu_radar.variance;
  double linear = pr.mu_radar.mean / pr.mu_radar.variance;
  const double phi = spec.hyper.phi_radar;
  for (int k = 0; k < obs.times; ++k) {
    const VectorXd& x = states[static_cast<std::size_t>(spec.time.obs_step[static_cast<std::size_t>(k)])];
    const VectorXd& y = complete[static_cast<std::size_t>(k)];
    for (int c = 0; c < obs.cells; ++c) {
      if (obs.flag(k, c) == ObsFlag::kMissing) continue;
      precision += phi;
      linear += phi * (y[c] - x[c]);
    }
  }
  return finish(precision, linear, "mu_r");
}

GaussianFcd alpha_fcd(const ModelSpec& spec, const StaticParams& params, std::span<const Velocity> velocities,
                      const StatePath& states) {
  require_path(spec, velocities, states);
  const int n = spec.cells();
  const Priors& pr = spec.priors;
  const double phi = step_precision(spec);
  double precision = 1.0 / pr.alpha.variance;
  double linear = pr.alpha.mean / pr.alpha.variance;
  Scratch w(n);
  for (int s = 1; s < spec.time.steps(); ++s) {
    transition_terms(spec, params.mu, states, s, w);
    // G(nu) = alpha H(beta, nu).
    spec.lattice.apply(theta_stencil(1.0, params.beta, velocities[static_cast<std::size_t>(s - 1)]),
                       view(w.d, 0, n), view(w.a));
    precision += phi * w.a.squaredNorm();
    linear += phi * w.a.dot(w.z);
  }
  GaussianFcd fcd = finish(precision, linear, "alpha");
  fcd.lower = 0.0;
  fcd.upper = 1.0;
  return fcd;
}

GaussianFcd beta_fcd(const ModelSpec& spec, const StaticParams& params, std::span<const Velocity> velocities,
                     const StatePath& states) {
  require_path(spec, velocities, states);
  const int n = spec.cells();
  const Priors& pr = spec.priors;
  const double phi = step_precision(spec);
  double precision = 1.0 / pr.beta.variance;
  double linear = pr.beta.mean / pr.beta.variance;
  Scratch w(n);
  const double alpha = params.alpha;
  for (int s = 1; s < spec.time.steps(); ++s) {
    transition_terms(spec, params.mu, states, s, w);
    // G d = alpha (d + nu_x dx + nu_y dy) + beta alpha lap(d).
    spec.lattice.apply(theta_stencil(alpha, 0.0, velocities[static_cast<std::size_t>(s - 1)]), view(w.d, 0, n),
                       view(w.b));
    spec.lattice.laplacian(view(w.d, 0, n), view(w.a));
    w.a *= alpha;
    precision += phi * w.a.squaredNorm();
    linear += phi * w.a.dot(w.z - w.b);
  }
  return finish(precision, linear, "beta");
}

VelocityFcd velocity_fcd(const ModelSpec& spec, const StaticParams& params, std::span<const Velocity> velocities,
                         const StatePath& states, int step) {
  require_path(spec, velocities, states);
  const int last = spec.time.augmented;
  if (step < 0 || step > last) throw std::out_of_range("velocity step outside time grid");
  const Hyperparams& hy = spec.hyper;
  const Priors& pr = spec.priors;
  Eigen::Matrix2d precision = Eigen::Matrix2d::Zero();
  Eigen::Vector2d linear = Eigen::Vector2d::Zero();

  if (step == 0) {
    if (!(pr.nu0_variance > 0.0)) {
      VelocityFcd fixed;
      fixed.mean = {pr.nu0_mean.x, pr.nu0_mean.y};
      fixed.fixed = true;
      return fixed;
    }
    precision.diagonal().setConstant(1.0 / pr.nu0_variance);
    linear = Eigen::Vector2d(pr.nu0_mean.x, pr.nu0_mean.y) / pr.nu0_variance;
  } else {
    const Velocity& before = velocities[static_cast<std::size_t>(step - 1)];
    precision.diagonal().setConstant(hy.phi_nu);
    linear = hy.phi_nu * hy.alpha_nu * Eigen::Vector2d(before.x, before.y);
  }

  if (step < last) {
    const Velocity& after = velocities[static_cast<std::size_t>(step + 1)];
    precision.diagonal().array() += hy.phi_nu * hy.alpha_nu * hy.alpha_nu;
    linear += hy.phi_nu * hy.alpha_nu * Eigen::Vector2d(after.x, after.y);

    // nu_step drives the transition step -> step + 1.
    const int n = spec.cells();
    const double phi = step_precision(spec);
    Scratch w(n);
    transition_terms(spec, params.mu, states, step + 1, w);
    VectorXd cx(n), cy(n);
    spec.lattice.advection_differences(view(w.d, 0, n), view(cx), view(cy));
    cx *= params.alpha;
    cy *= params.alpha;
    spec.lattice.apply(theta_stencil(params.alpha, params.beta, Velocity{}), view(w.d, 0, n), view(w.a));
    w.z -= w.a;
    precision(0, 0) += phi * cx.squaredNorm();
    precision(1, 1) += phi * cy.squaredNorm();
    precision(0, 1) += phi * cx.dot(cy);
    precision(1, 0) = precision(0, 1);
    linear[0] += phi * cx.dot(w.z);
    linear[1] += phi * cy.dot(w.z);
  }

  VelocityFcd fcd;
  fcd.precision = precision;
  Eigen::LLT<Eigen::Matrix2d> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("velocity full conditional not positive definite at step " + std::to_string(step));
  }
  fcd.mean = llt.solve(linear);
  return fcd;
}

StaticParams update_static(const ModelSpec& spec, const StaticParams& current, std::span<const Velocity> velocities,
                           const StatePath& states, const ObservationSet& obs, const CompleteData& complete,
                           std::uint64_t seed) {
  Rng rng(seed, Stream::kGibbsStatic);
  StaticParams p = current;
  const auto draw = [&rng](const GaussianFcd& f) {
    return sample_truncated_normal(f.mean, f.precision, f.lower, f.upper, rng);
  };
  p.mu = draw(mu_fcd(spec, p, velocities, states));
  p.mu_radar = draw(mu_radar_fcd(spec, p, obs, complete, states));
  p.alpha = draw(alpha_fcd(spec, p, velocities, states));
  p.beta = draw(beta_fcd(spec, p, velocities, states));
  return p;
}

void update_latent_obs(const ModelSpec& spec, const StaticParams& params, const StatePath& states,
                       const ObservationSet& obs, CompleteData& complete, std::uint64_t seed) {
  const double inf = std::numeric_limits<double>::infinity();
  for (int k = 0; k < obs.times; ++k) {
    Rng rng(seed, Stream::kGibbsLatent, {static_cast<std::uint64_t>(k)});
    const VectorXd& x = states[static_cast<std::size_t>(spec.time.obs_step[static_cast<std::size_t>(k)])];
    VectorXd& y = complete[static_cast<std::size_t>(k)];
    for (int c = 0; c < obs.width(); ++c) {
      if (obs.flag(k, c) != ObsFlag::kCensored) continue;
      const bool radar = c < obs.cells;
      const double mean = radar ? x[c] + params.mu_radar : x[spec.gauge_cells[static_cast<std::size_t>(c - obs.cells)]];
      const double phi = radar ? spec.hyper.phi_radar : spec.hyper.phi_gauge;
      y[c] = sample_truncated_normal(mean, phi, -inf, 0.0, rng);
    }
  }
}

void update_velocities(const ModelSpec& spec, const StaticParams& params, std::vector<Velocity>& velocities,
                       const StatePath& states, std::uint64_t seed) {
  Rng rng(seed, Stream::kGibbsVelocity);
  for (int t = 0; t <= spec.time.augmented; ++t) {
    const VelocityFcd fcd = velocity_fcd(spec, params, velocities, states, t);
    if (fcd.fixed) {
      velocities[static_cast<std::size_t>(t)] = {fcd.mean[0], fcd.mean[1]};
      continue;
    }
    // x = mean + U^-1 z with precision = U' U.
    const Eigen::LLT<Eigen::Matrix2d> llt(fcd.precision);
    const Eigen::Vector2d z(rng.normal(), rng.normal());
    const Eigen::Vector2d x = fcd.mean + llt.matrixU().solve(z);
    velocities[static_cast<std::size_t>(t)] = {x[0], x[1]};
  }
}

void GibbsConfig::validate() const {
  if (iterations < 0 || burnin < 0) throw ConfigError("iterations and burn-in must be >= 0");
  if (thin < 1 || state_thin < 1) throw ConfigError("thinning intervals must be >= 1");
  smoother.validate();
}

void StateAccumulator::add(const StatePath& states, int cells) {
  const auto steps = static_cast<Eigen::Index>(states.size());
  if (count == 0) {
    mean = Eigen::MatrixXd::Zero(steps, cells);
    m2 = Eigen::MatrixXd::Zero(steps, cells);
    positive = Eigen::MatrixXd::Zero(steps, cells);
  }
  ++count;
  const double inv = 1.0 / static_cast<double>(count);
  for (Eigen::Index s = 0; s < steps; ++s) {
    const VectorXd& x = states[static_cast<std::size_t>(s)];
    for (int c = 0; c < cells; ++c) {
      const double v = x[c];
      const double delta = v - mean(s, c);
      mean(s, c) += delta * inv;
      m2(s, c) += delta * (v - mean(s, c));
      if (v > 0.0) positive(s, c) += 1.0;
    }
  }
}

int DrawStore::expected_stored(int iterations, int burnin, int thin) {
  const int post = iterations - burnin;
  return post <= 0 ? 0 : (post + thin - 1) / thin;
}

GibbsState initial_gibbs_state(const ModelSpec& spec, const ObservationSet& obs, double fill) {
  GibbsState st;
  const Priors& pr = spec.priors;
  st.params.mu = pr.mu.mean;
  st.params.mu_radar = pr.mu_radar.mean;
  st.params.alpha = std::clamp(pr.alpha.mean, 0.01, 0.99);
  st.params.beta = pr.beta.mean;
  st.velocities.assign(static_cast<std::size_t>(spec.time.steps()), pr.nu0_mean);
  st.complete = complete_from_observed(obs, fill);
  return st;
}

void gibbs_iteration(const ModelSpec& spec, const ObservationSet& obs, const GibbsConfig& config, GibbsState& state,
                     std::uint64_t seed, int iteration) {
  const auto it = static_cast<std::uint64_t>(iteration);
  const std::uint64_t state_seed = derive_seed(seed, Stream::kGibbsState, {it});
  if (config.sampler == StateSampler::kExact) {
    state.states = exact_ffbs(spec, state.params, state.velocities, obs, state.complete, state_seed).draw;
  } else {
    state.states =
        enks_draw(spec, state.params, state.velocities, obs, state.complete, config.smoother, state_seed).draw;
  }
  state.params = update_static(spec, state.params, state.velocities, state.states, obs, state.complete,
                               derive_seed(seed, Stream::kGibbsStatic, {it}));
  update_latent_obs(spec, state.params, state.states, obs, state.complete,
                    derive_seed(seed, Stream::kGibbsLatent, {it}));
  update_velocities(spec, state.params, state.velocities, state.states,
                    derive_seed(seed, Stream::kGibbsVelocity, {it}));
}

DrawStore run_genks(const ModelSpec& spec, const ObservationSet& obs, const GibbsConfig& config, std::uint64_t seed,
                    const std::function<void(int)>& progress) {
  spec.validate();
  obs.validate();
  config.validate();
  if (obs.times != spec.time.times || obs.cells != spec.cells() || obs.gauge_cells != spec.gauge_cells) {
    throw DataError("observation set does not match the model dimensions");
  }

  DrawStore store;
  store.iterations = config.iterations;
  store.burnin = config.burnin;
  store.thin = config.thin;
  store.state_thin = config.state_thin;
  store.steps = spec.time.steps();
  store.cells = spec.cells();

  GibbsState state = initial_gibbs_state(spec, obs);
  int stored = 0;
  for (int iter = 0; iter < config.iterations; ++iter) {
    try {
      gibbs_iteration(spec, obs, config, state, seed, iter);
    } catch (const NumericalError& e) {
      throw NumericalError("iteration " + std::to_string(iter) + ": " + e.what());
    }
    if (progress) progress(iter);
    if (iter < config.burnin) continue;
    const int post = iter - config.burnin;
    store.theta.add(state.states, store.cells);
    if (post % config.thin != 0) continue;

    store.iteration.push_back(iter);
    store.params.push_back(state.params);
    store.velocities.push_back(state.velocities);
    store.loglik_observed.push_back(observed_data_loglik(spec, state.params, state.states, obs));
    store.loglik_complete.push_back(complete_data_loglik(spec, state.params, state.states, obs, state.complete));
    if (stored % config.state_thin == 0) {
      store.terminal.push_back({iter, state.params, state.velocities.back(), state.states.back()});
      if (config.store_paths) store.paths.push_back(state.states);
    }
    ++stored;
  }
  return store;
}

}  // namespace stormfield
