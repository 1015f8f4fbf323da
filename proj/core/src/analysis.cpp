#include "stormfield/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "stormfield/parallel.hpp"
#include "stormfield/random.hpp"
#include "stormfield/truncated_normal.hpp"

namespace stormfield {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

const Eigen::VectorXd& state_at(const ModelSpec& spec, const StatePath& states, int k) {
  const int step = spec.time.obs_step.at(static_cast<std::size_t>(k));
  if (static_cast<std::size_t>(step) >= states.size()) {
    throw std::invalid_argument("state path does not cover the observation times");
  }
  return states[static_cast<std::size_t>(step)];
}

template <typename Visit>
void for_each_entry(const ModelSpec& spec, const StaticParams& params, const StatePath& states,
                    const ObservationSet& obs, Visit&& visit) {
  for (int k = 0; k < obs.times; ++k) {
    const Eigen::VectorXd& x = state_at(spec, states, k);
    for (int c = 0; c < obs.width(); ++c) {
      const ObsFlag f = obs.flag(k, c);
      if (f == ObsFlag::kMissing) continue;
      const bool radar = c < obs.cells;
      const double mean =
          radar ? x[c] + params.mu_radar : x[obs.gauge_cells[static_cast<std::size_t>(c - obs.cells)]];
      const double phi = radar ? spec.hyper.phi_radar : spec.hyper.phi_gauge;
      visit(k, c, f, mean, phi);
    }
  }
}

}  // namespace

double tobit_log_contribution(double y, bool censored, double mean, double precision) {
  if (censored) return log_normal_cdf(-std::sqrt(precision) * mean);
  const double r = y - mean;
  return 0.5 * std::log(precision) - kHalfLog2Pi - 0.5 * precision * r * r;
}

double observed_data_loglik(const ModelSpec& spec, const StaticParams& params, const StatePath& states,
                            const ObservationSet& obs) {
  double total = 0.0;
  for_each_entry(spec, params, states, obs, [&](int k, int c, ObsFlag f, double mean, double phi) {
    total += tobit_log_contribution(obs.value(k, c), f == ObsFlag::kCensored, mean, phi);
  });
  return total;
}

double complete_data_loglik(const ModelSpec& spec, const StaticParams& params, const StatePath& states,
                            const ObservationSet& obs, const CompleteData& complete) {
  double total = 0.0;
  for_each_entry(spec, params, states, obs, [&](int k, int c, ObsFlag, double mean, double phi) {
    total += tobit_log_contribution(complete[static_cast<std::size_t>(k)][c], false, mean, phi);
  });
  return total;
}

DicResult dic(std::span<const double> loglik) {
  if (loglik.size() < 2) throw std::invalid_argument("DIC needs at least two log-likelihood values");
  const double n = static_cast<double>(loglik.size());
  double mean = 0.0;
  for (double v : loglik) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : loglik) ss += (v - mean) * (v - mean);
  DicResult r;
  r.p_d = 2.0 * ss / (n - 1.0);
  r.mean_deviance = -2.0 * mean;
  r.dic = r.mean_deviance + r.p_d;
  return r;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

StateSummary summarize_states(const DrawStore& store) {
  const StateAccumulator& acc = store.theta;
  if (acc.count < 2) throw std::invalid_argument("state summary needs at least two draws");
  StateSummary s;
  s.draws = acc.count;
  s.mean = acc.mean;
  s.sd = (acc.m2 / static_cast<double>(acc.count - 1)).cwiseMax(0.0).cwiseSqrt();
  s.pr_positive = acc.positive / static_cast<double>(acc.count);

  const std::size_t steps = static_cast<std::size_t>(store.steps);
  if (store.velocities.size() < 2) return s;
  std::vector<double> xs(store.velocities.size()), ys(store.velocities.size());
  for (std::size_t t = 0; t < steps; ++t) {
    double mx = 0.0, my = 0.0;
    for (std::size_t d = 0; d < store.velocities.size(); ++d) {
      xs[d] = store.velocities[d][t].x;
      ys[d] = store.velocities[d][t].y;
      mx += xs[d];
      my += ys[d];
    }
    const double n = static_cast<double>(xs.size());
    s.nu_x.push_back({mx / n, quantile(xs, 0.025), quantile(xs, 0.975)});
    s.nu_y.push_back({my / n, quantile(ys, 0.025), quantile(ys, 0.975)});
  }
  return s;
}

StateSummary summarize_paths(std::span<const StatePath> paths, int cells) {
  if (paths.size() < 2) throw std::invalid_argument("state summary needs at least two draws");
  const auto steps = static_cast<Eigen::Index>(paths.front().size());
  const double n = static_cast<double>(paths.size());
  StateSummary s;
  s.draws = static_cast<long>(paths.size());
  s.mean = Eigen::MatrixXd::Zero(steps, cells);
  s.sd = Eigen::MatrixXd::Zero(steps, cells);
  s.pr_positive = Eigen::MatrixXd::Zero(steps, cells);
  for (const StatePath& p : paths) {
    for (Eigen::Index t = 0; t < steps; ++t) {
      s.mean.row(t) += p[static_cast<std::size_t>(t)].head(cells).transpose();
    }
  }
  s.mean /= n;
  for (const StatePath& p : paths) {
    for (Eigen::Index t = 0; t < steps; ++t) {
      for (int c = 0; c < cells; ++c) {
        const double v = p[static_cast<std::size_t>(t)][c];
        s.sd(t, c) += (v - s.mean(t, c)) * (v - s.mean(t, c));
        if (v > 0.0) s.pr_positive(t, c) += 1.0;
      }
    }
  }
  s.sd = (s.sd / (n - 1.0)).cwiseSqrt();
  s.pr_positive /= n;
  return s;
}

ForecastSet forecast(const ModelSpec& spec, std::span<const TerminalDraw> draws, const ForecastOptions& options,
                     std::uint64_t seed) {
  if (options.horizon < 1) throw std::invalid_argument("forecast horizon must be >= 1");
  if (draws.size() < 2) throw std::invalid_argument("forecast summaries need at least two draws");
  const int n = spec.cells();
  const int dim = spec.state_dim();

  std::vector<std::size_t> order(draws.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return draws[a].iteration < draws[b].iteration; });

  ForecastSet out;
  out.horizon = options.horizon;
  out.steps_per_obs = spec.time.imputed_steps + 1;
  out.draws = static_cast<int>(draws.size());
  const int steps = out.steps();
  for (std::size_t i : order) out.draw_ids.push_back(draws[i].iteration);

  const Hyperparams& hy = spec.hyper;
  const double sd_theta = 1.0 / std::sqrt(hy.theta_step_precision());
  const double sd_source = 1.0 / std::sqrt(hy.source_step_precision());
  const double sd_nu = 1.0 / std::sqrt(hy.phi_nu);

  std::vector<StatePath> paths(draws.size());
  parallel_for(draws.size(), options.threads, [&](std::size_t begin, std::size_t end) {
    Eigen::VectorXd x(dim), next(dim);
    for (std::size_t d = begin; d < end; ++d) {
      const TerminalDraw& draw = draws[order[d]];
      if (draw.state.size() != dim) throw std::invalid_argument("terminal state has the wrong dimension");
      Rng rng(seed, Stream::kForecast, {static_cast<std::uint64_t>(draw.iteration)});
      x = draw.state;
      Velocity nu = draw.velocity;
      StatePath& path = paths[d];
      path.reserve(static_cast<std::size_t>(steps));
      for (int h = 0; h < steps; ++h) {
        propagate_mean(spec, draw.params, nu, x, next);
        for (int i = 0; i < n; ++i) next[i] += sd_theta * rng.normal();
        for (int i = n; i < dim; ++i) next[i] += sd_source * rng.normal();
        nu.x = hy.alpha_nu * nu.x + sd_nu * rng.normal();
        nu.y = hy.alpha_nu * nu.y + sd_nu * rng.normal();
        x.swap(next);
        path.push_back(x.head(n));
      }
    }
  });

  const double count = static_cast<double>(draws.size());
  out.mean = Eigen::MatrixXd::Zero(steps, n);
  out.sd = Eigen::MatrixXd::Zero(steps, n);
  out.pr_positive = Eigen::MatrixXd::Zero(steps, n);
  out.rate_mean = Eigen::MatrixXd::Zero(steps, n);
  for (const StatePath& p : paths) {
    for (int h = 0; h < steps; ++h) {
      for (int i = 0; i < n; ++i) {
        const double v = p[static_cast<std::size_t>(h)][i];
        out.mean(h, i) += v;
        if (v > 0.0) {
          out.pr_positive(h, i) += 1.0;
          out.rate_mean(h, i) += std::expm1(v);
        }
      }
    }
  }
  out.mean /= count;
  out.pr_positive /= count;
  out.rate_mean /= count;
  for (const StatePath& p : paths) {
    for (int h = 0; h < steps; ++h) {
      const Eigen::VectorXd r = p[static_cast<std::size_t>(h)] - out.mean.row(h).transpose();
      out.sd.row(h) += r.cwiseAbs2().transpose();
    }
  }
  out.sd = (out.sd / (count - 1.0)).cwiseSqrt();
  if (options.keep_paths) out.paths = std::move(paths);
  return out;
}

}  // namespace stormfield
