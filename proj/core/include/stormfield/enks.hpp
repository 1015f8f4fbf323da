#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "stormfield/model.hpp"

namespace stormfield {

/// How (F S~ F' + F W F' + V)^-1 is applied to the innovations.
enum class GainSolve {
  kAuto,              // ensemble space when there are more rows than members
  kObservationSpace,  // Cholesky of the p x p innovation covariance
  kEnsembleSpace,     // Woodbury identity through an Ne x Ne system
};

/// How lagged slices absorb an update.
enum class LagUpdate {
  kAuto,       // cheaper of the two for the problem size
  kTransform,  // accumulate an Ne x Ne right-multiplier per slice
  kDirect,     // update the 2N x Ne slice in place
};

struct SmootherConfig {
  int ensemble_size = 100;
  int lag = 3;  // in observation times; covers lag * (t~ + 1) augmented steps
  GainSolve solve = GainSolve::kAuto;
  LagUpdate lag_update = LagUpdate::kAuto;
  int threads = 1;

  void validate() const;
};

struct SmootherResult {
  std::vector<Eigen::VectorXd> draw;  // x_{0:T~} of the selected member
  std::vector<Eigen::VectorXd> mean;  // smoothed ensemble means
  int member = 0;
};

/// Fixed-lag ensemble Kalman smoother draw of x_{0:T~} given complete data.
///
/// Members start from the x_0 prior and are propagated with the model's
/// innovations. At each observation time the members' pseudo-observations
/// are compared with the data and every slice inside the lag window is
/// shifted by the gain built from the noise-free ("deterministic") forecast
/// ensemble. Steps without observations only propagate. One member, chosen
/// uniformly at random, is returned.
///
/// Throws NumericalError (with the augmented step) if the innovation
/// covariance cannot be factorised even after jitter.
SmootherResult enks_draw(const ModelSpec& spec, const StaticParams& params, std::span<const Velocity> velocities,
                         const ObservationSet& obs, const CompleteData& complete, const SmootherConfig& config,
                         std::uint64_t seed);

/// Explicit gain from a deterministic forecast ensemble (2N x Ne columns).
/// With `slice` null this is the l = t branch (S~_tt + W) F' (...)^-1,
/// otherwise S~_lt F' (...)^-1 with S~_lt the cross-covariance of `slice`
/// and the deterministic ensemble. Sample covariances use divisor Ne - 1.
Eigen::MatrixXd kalman_gain_deterministic(const Eigen::MatrixXd& deterministic, const Eigen::MatrixXd* slice,
                                          const Eigen::MatrixXd& F, const Eigen::VectorXd& W,
                                          const Eigen::VectorXd& V);

/// Exact Gaussian smoother for small problems (2N <= 512): Kalman filter,
/// Rauch-Tung-Striebel smoothed moments and a forward-filter
/// backward-sample joint draw.
struct ExactSmootherResult {
  std::vector<Eigen::VectorXd> filtered_mean;
  std::vector<Eigen::MatrixXd> filtered_cov;
  std::vector<Eigen::VectorXd> smoothed_mean;
  std::vector<Eigen::MatrixXd> smoothed_cov;
  std::vector<Eigen::VectorXd> draw;
};

inline constexpr int kExactSmootherMaxDim = 512;

ExactSmootherResult exact_ffbs(const ModelSpec& spec, const StaticParams& params, std::span<const Velocity> velocities,
                               const ObservationSet& obs, const CompleteData& complete, std::uint64_t seed,
                               bool want_draw = true);

}  // namespace stormfield
