#include <cmath>
#include <string>

#include "stormfield/enks.hpp"
#include "stormfield/errors.hpp"
#include "stormfield/random.hpp"

namespace stormfield {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd draw_gaussian(const VectorXd& mean, const MatrixXd& cov, Rng& rng) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (cov + cov.transpose()));
  const VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + eig.eigenvectors() * root.cwiseProduct(z);
}

double inverse_or_zero(double precision) { return std::isinf(precision) ? 0.0 : 1.0 / precision; }

}  // namespace

ExactSmootherResult exact_ffbs(const ModelSpec& spec, const StaticParams& params, std::span<const Velocity> velocities,
                               const ObservationSet& obs, const CompleteData& complete, std::uint64_t seed,
                               bool want_draw) {
  const int dim = spec.state_dim();
  if (dim > kExactSmootherMaxDim) {
    throw ConfigError("exact smoother limited to state dimension " + std::to_string(kExactSmootherMaxDim) + ", got " +
                      std::to_string(dim));
  }
  const TimeGrid& tg = spec.time;
  const int steps = tg.steps();
  if (static_cast<int>(velocities.size()) != steps) throw ConfigError("velocity path does not cover the time grid");
  const int n_cells = spec.cells();
  const DlmComponents dlm = assemble_dlm(params, spec.hyper, spec.lattice, spec.gauge_cells);

  VectorXd mu_l = VectorXd::Zero(dim);
  mu_l.head(n_cells).setConstant(params.mu);
  VectorXd w_diag(dim);
  w_diag.head(n_cells).setConstant(inverse_or_zero(spec.hyper.theta_step_precision()));
  w_diag.tail(n_cells).setConstant(inverse_or_zero(spec.hyper.source_step_precision()));

  ExactSmootherResult out;
  out.filtered_mean.resize(static_cast<std::size_t>(steps));
  out.filtered_cov.resize(static_cast<std::size_t>(steps));
  std::vector<VectorXd> pred_mean(static_cast<std::size_t>(steps));
  std::vector<MatrixXd> pred_cov(static_cast<std::size_t>(steps));
  std::vector<MatrixXd> transition(static_cast<std::size_t>(steps));

  VectorXd m(dim);
  m.head(n_cells).setConstant(params.mu + spec.priors.theta0.mean);
  m.tail(n_cells).setConstant(spec.priors.source0.mean);
  MatrixXd C = MatrixXd::Zero(dim, dim);
  C.diagonal().head(n_cells).setConstant(spec.priors.theta0.variance);
  C.diagonal().tail(n_cells).setConstant(spec.priors.source0.variance);
  out.filtered_mean[0] = m;
  out.filtered_cov[0] = C;

  for (int s = 1; s < steps; ++s) {
    const auto idx = static_cast<std::size_t>(s);
    const MatrixXd G = MatrixXd(dlm.transition(velocities[idx - 1]));
    transition[idx] = G;
    VectorXd a = G * (m - mu_l) + mu_l;
    MatrixXd R = G * C * G.transpose();
    R.diagonal() += w_diag;
    pred_mean[idx] = a;
    pred_cov[idx] = R;

    const int k = tg.obs_at_step[idx];
    if (k >= 0) {
      const ObservationRows rows = observation_rows(spec, obs, k, params, &complete);
      const int p = rows.size();
      if (p > 0) {
        MatrixXd H = MatrixXd::Zero(p, dim);
        for (int i = 0; i < p; ++i) H(i, rows.cell[static_cast<std::size_t>(i)]) = 1.0;
        const VectorXd f = H * a + rows.offset;
        MatrixXd Q = H * R * H.transpose();
        Q.diagonal() += rows.precision.cwiseInverse();
        const Eigen::LDLT<MatrixXd> ldlt(Q);
        if (ldlt.info() != Eigen::Success) {
          throw NumericalError("exact filter innovation covariance failed at augmented step " + std::to_string(s));
        }
        const MatrixXd RHt = R * H.transpose();
        const MatrixXd K = ldlt.solve(RHt.transpose()).transpose();
        a += K * (rows.value - f);
        R -= K * RHt.transpose();
        R = 0.5 * (R + R.transpose());
      }
    }
    m = a;
    C = R;
    out.filtered_mean[idx] = m;
    out.filtered_cov[idx] = C;
  }

  out.smoothed_mean.resize(static_cast<std::size_t>(steps));
  out.smoothed_cov.resize(static_cast<std::size_t>(steps));
  out.smoothed_mean.back() = out.filtered_mean.back();
  out.smoothed_cov.back() = out.filtered_cov.back();
  std::vector<MatrixXd> gains(static_cast<std::size_t>(steps));
  for (int s = steps - 2; s >= 0; --s) {
    const auto idx = static_cast<std::size_t>(s);
    const MatrixXd& Cf = out.filtered_cov[idx];
    const MatrixXd& Rn = pred_cov[idx + 1];
    // J = C G' R^-1; pseudo-inverse tolerates singular R when W = 0.
    const Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(Rn);
    const MatrixXd J = cod.solve(transition[idx + 1] * Cf).transpose();
    gains[idx] = J;
    out.smoothed_mean[idx] = out.filtered_mean[idx] + J * (out.smoothed_mean[idx + 1] - pred_mean[idx + 1]);
    MatrixXd Cs = Cf + J * (out.smoothed_cov[idx + 1] - Rn) * J.transpose();
    out.smoothed_cov[idx] = 0.5 * (Cs + Cs.transpose());
  }

  if (want_draw) {
    Rng rng(seed, Stream::kExactDraw);
    out.draw.resize(static_cast<std::size_t>(steps));
    out.draw.back() = draw_gaussian(out.filtered_mean.back(), out.filtered_cov.back(), rng);
    for (int s = steps - 2; s >= 0; --s) {
      const auto idx = static_cast<std::size_t>(s);
      const MatrixXd& J = gains[idx];
      const VectorXd h = out.filtered_mean[idx] + J * (out.draw[idx + 1] - pred_mean[idx + 1]);
      const MatrixXd Hc = out.filtered_cov[idx] - J * pred_cov[idx + 1] * J.transpose();
      out.draw[idx] = draw_gaussian(h, Hc, rng);
    }
  }
  return out;
}

}  // namespace stormfield
