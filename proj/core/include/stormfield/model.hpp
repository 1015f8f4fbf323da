#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "stormfield/lattice.hpp"

namespace stormfield {

/// Unknown static quantities rho = (mu, mu_r, alpha, beta).
struct StaticParams {
  double mu = 0.0;        // field mean, transformed-rate units
  double mu_radar = 0.0;  // radar bias, transformed-rate units
  double alpha = 0.8;     // persistence, strictly inside (0, 1)
  double beta = 0.1;      // diffusion weight

  void validate() const;
};

/// Constants held fixed during inference.
struct Hyperparams {
  double phi_gauge = 100.0;
  double phi_radar = 2.0;
  double phi_theta = 40.0;
  double phi_source = 20.0;
  double phi_nu = 2000.0;
  double alpha_nu = 0.95;
  double alpha_source = 0.85;
  double beta_source = 0.15;
  int imputed_steps = 0;

  /// Innovation precisions after rescaling W^-1 -> W^-1 (t~ + 1) for imputed steps.
  double theta_step_precision() const { return phi_theta * (imputed_steps + 1); }
  double source_step_precision() const { return phi_source * (imputed_steps + 1); }

  void validate() const;
};

struct GaussianPrior {
  double mean = 0.0;
  double variance = 1.0;
};

/// Prior settings. Initial-state priors are isotropic: theta_0 | mu ~
/// N((theta0.mean + mu) 1, theta0.variance I), S_0 ~ N(source0.mean 1,
/// source0.variance I), nu_0 ~ N(nu0_mean, nu0_variance I_2). The alpha
/// prior is truncated to (0, 1).
struct Priors {
  GaussianPrior mu{0.0, 1.0};
  GaussianPrior mu_radar{0.0, 1.0};
  GaussianPrior alpha{0.8, 1.0 / 250.0};
  GaussianPrior beta{0.1, 1.0 / 500.0};
  GaussianPrior theta0{0.0, 4.0};
  GaussianPrior source0{0.0, 0.25};
  Velocity nu0_mean{};
  double nu0_variance = 0.01;

  /// Static-parameter variances must be positive; initial-state variances
  /// may be zero (point-mass initial conditions).
  void validate() const;
};

enum class ObsFlag : std::uint8_t { kPositive, kCensored, kMissing };

/// Transformed observations for T observation times. Columns 0..N-1 hold the
/// radar grid, columns N..N+Ng-1 the gauges. Missing entries hold NaN and
/// censored entries hold 0.
struct ObservationSet {
  int times = 0;
  int cells = 0;
  std::vector<int> gauge_cells;       // 0-based linear cell index per gauge
  std::vector<std::string> gauge_ids;
  Eigen::MatrixXd value;              // times x width()
  std::vector<ObsFlag> flags;         // row-major times x width()

  int gauges() const { return static_cast<int>(gauge_cells.size()); }
  int width() const { return cells + gauges(); }
  ObsFlag flag(int t, int column) const {
    return flags[static_cast<std::size_t>(t) * static_cast<std::size_t>(width()) + static_cast<std::size_t>(column)];
  }
  void set(int t, int column, ObsFlag f, double v);

  /// Allocate an all-missing set.
  static ObservationSet empty(int times, int cells, std::vector<int> gauge_cells,
                              std::vector<std::string> gauge_ids = {});
  /// Throws DataError on inconsistent shapes, non-positive positives or bad cells.
  void validate() const;
};

/// Mapping between observation times and the augmented time axis.
/// Augmented index 0 holds the initial condition; observation k (0-based)
/// sits at augmented index 1 + k (t~ + 1), so the last observation lands on
/// T~ = t~ (T - 1) + T.
struct TimeGrid {
  int times = 0;
  int imputed_steps = 0;
  int augmented = 0;                // T~
  std::vector<int> obs_step;        // per observation time
  std::vector<int> obs_at_step;     // per augmented step 0..T~, -1 if none

  int steps() const { return augmented + 1; }
};

TimeGrid time_map(int times, int imputed_steps);

/// log(rate + 1). Throws std::domain_error for negative input.
double transform_obs(double rate);
/// exp(y) - 1. Throws std::domain_error for negative input.
double inverse_transform(double y);

/// Everything held fixed over a run.
struct ModelSpec {
  Lattice lattice;
  TimeGrid time;
  Hyperparams hyper;
  Priors priors;
  std::vector<int> gauge_cells;

  int cells() const { return lattice.cells(); }
  int state_dim() const { return 2 * lattice.cells(); }
  int obs_width() const { return cells() + static_cast<int>(gauge_cells.size()); }
  void validate() const;
};

/// Complete data: per observation time, a vector of width N + Ng holding
/// observed positives and latent values for censored entries. Missing
/// entries are NaN.
using CompleteData = std::vector<Eigen::VectorXd>;

/// Initialise complete data from observations; censored entries get `fill`.
CompleteData complete_from_observed(const ObservationSet& obs, double fill);

/// next = G~(prev - mu L) + mu L, i.e. theta' = mu + G(nu)(theta - mu) + S,
/// S' = G* S. `prev` and `next` must not alias.
void propagate_mean(const ModelSpec& spec, const StaticParams& params, Velocity nu,
                    const Eigen::Ref<const Eigen::VectorXd>& prev, Eigen::Ref<Eigen::VectorXd> next);

/// The non-missing rows of the observation equation at one observation time.
struct ObservationRows {
  std::vector<int> column;   // column in the observation set
  std::vector<int> cell;     // theta cell observed by the row
  Eigen::VectorXd precision; // phi_r or phi_g
  Eigen::VectorXd offset;    // mu_r for radar rows, 0 for gauges
  Eigen::VectorXd value;     // complete-data value

  int size() const { return static_cast<int>(column.size()); }
};

ObservationRows observation_rows(const ModelSpec& spec, const ObservationSet& obs, int k,
                                 const StaticParams& params, const CompleteData* complete);

/// Complete-data DLM matrices. F is (N+Ng) x 2N, V and W are diagonals.
struct DlmComponents {
  Eigen::SparseMatrix<double> F;
  Eigen::VectorXd V;
  Eigen::VectorXd W;
  /// G~_t built from G(nu_{t-1}); 2N x 2N with blocks [G(nu) I; 0 G*].
  Eigen::SparseMatrix<double> transition(Velocity nu) const;

  const Lattice* lattice = nullptr;
  StaticParams params;
  Hyperparams hyper;
};

DlmComponents assemble_dlm(const StaticParams& params, const Hyperparams& hyper, const Lattice& lattice,
                           const std::vector<int>& gauge_cells);

}  // namespace stormfield
