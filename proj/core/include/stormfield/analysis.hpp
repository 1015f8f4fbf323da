#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "stormfield/gibbs.hpp"
#include "stormfield/model.hpp"

namespace stormfield {

/// Tobit log-density of one transformed observation: the Gaussian branch
/// for y > 0, log Phi(-sqrt(phi) mean) for a zero-censored entry.
double tobit_log_contribution(double y, bool censored, double mean, double precision);

/// Sum of Tobit contributions over all non-missing radar and gauge entries.
double observed_data_loglik(const ModelSpec& spec, const StaticParams& params, const StatePath& states,
                            const ObservationSet& obs);

/// Gaussian log-density of the complete data (latent values included) given the states.
double complete_data_loglik(const ModelSpec& spec, const StaticParams& params, const StatePath& states,
                            const ObservationSet& obs, const CompleteData& complete);

struct DicResult {
  double dic = 0.0;
  double p_d = 0.0;
  double mean_deviance = 0.0;
};

/// p_D = 2 var(loglik) with divisor n - 1. Throws std::invalid_argument for fewer than 2 values.
DicResult dic(std::span<const double> loglik);

struct Interval {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Empirical quantile with linear interpolation between order statistics.
double quantile(std::vector<double> values, double p);

struct StateSummary {
  long draws = 0;
  Eigen::MatrixXd mean;         // steps x cells
  Eigen::MatrixXd sd;
  Eigen::MatrixXd pr_positive;
  std::vector<Interval> nu_x;   // per augmented step, 95% interval
  std::vector<Interval> nu_y;
};

/// Summaries from the running accumulators plus velocity intervals from the
/// stored nu paths. Throws std::invalid_argument with fewer than 2 draws.
StateSummary summarize_states(const DrawStore& store);

/// Batch summary of explicit state paths (no velocity intervals).
StateSummary summarize_paths(std::span<const StatePath> paths, int cells);

struct ForecastSet {
  int horizon = 0;         // observation steps K
  int steps_per_obs = 1;   // t~ + 1
  int draws = 0;
  std::vector<int> draw_ids;            // iteration of each source draw, sorted
  std::vector<StatePath> paths;         // per draw, theta for steps 1..K(t~+1)
  Eigen::MatrixXd mean;                 // horizon step x cells, latent scale
  Eigen::MatrixXd sd;
  Eigen::MatrixXd pr_positive;
  Eigen::MatrixXd rate_mean;            // mean of max(exp(theta) - 1, 0), mm/h

  int steps() const { return horizon * steps_per_obs; }
};

struct ForecastOptions {
  int horizon = 1;
  int threads = 1;
  bool keep_paths = true;
};

/// Run the state and velocity recursions forward from each terminal draw
/// with fresh innovations. Draws are processed in order of their iteration
/// so the result does not depend on the order they are passed in.
ForecastSet forecast(const ModelSpec& spec, std::span<const TerminalDraw> draws, const ForecastOptions& options,
                     std::uint64_t seed);

}  // namespace stormfield
