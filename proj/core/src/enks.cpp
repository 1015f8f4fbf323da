#include "stormfield/enks.hpp"

#include <cmath>
#include <deque>
#include <string>
#include <unordered_map>

#include "stormfield/errors.hpp"
#include "stormfield/parallel.hpp"
#include "stormfield/random.hpp"

namespace stormfield {

void SmootherConfig::validate() const {
  if (ensemble_size < 2) throw ConfigError("ensemble size must be at least 2");
  if (lag < 0) throw ConfigError("smoothing lag must be >= 0");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Slice {
  int step = 0;
  MatrixXd base;       // 2N x Ne
  MatrixXd transform;  // Ne x Ne right-multiplier; empty for direct updates
};

double inverse_or_zero(double precision) { return std::isinf(precision) ? 0.0 : 1.0 / precision; }

// Observation-row geometry shared by both solve routes. The innovation
// covariance is S = A A' + R with R = F W F' + V; R couples rows that
// observe the same theta cell through the W theta block.
struct RowGeometry {
  const ObservationRows* rows = nullptr;
  double w_theta = 0.0;
  std::unordered_map<int, std::vector<int>> by_cell;

  RowGeometry(const ObservationRows& r, double w) : rows(&r), w_theta(w) {
    for (int i = 0; i < r.size(); ++i) by_cell[r.cell[static_cast<std::size_t>(i)]].push_back(i);
  }

  // R^-1 u via Woodbury on R = V + w E E', where E' V^-1 E is diagonal.
  MatrixXd apply_r_inverse(const MatrixXd& u) const {
    MatrixXd out = rows->precision.asDiagonal() * u;
    if (w_theta <= 0.0) return out;
    const double inv_w = 1.0 / w_theta;
    Eigen::RowVectorXd acc(u.cols());
    for (const auto& [cell, members] : by_cell) {
      (void)cell;
      double d = 0.0;
      acc.setZero();
      for (int r : members) {
        d += rows->precision[r];
        acc += out.row(r);
      }
      acc /= (inv_w + d);
      for (int r : members) out.row(r) -= rows->precision[r] * acc;
    }
    return out;
  }

  void add_r(MatrixXd& s) const {
    for (int i = 0; i < rows->size(); ++i) s(i, i) += 1.0 / rows->precision[i];
    if (w_theta <= 0.0) return;
    for (const auto& [cell, members] : by_cell) {
      (void)cell;
      for (int a : members) {
        for (int b : members) s(a, b) += w_theta;
      }
    }
  }
};

struct GainSolution {
  MatrixXd Z;  // S^-1 innovations, p x Ne
  MatrixXd M;  // A' Z, Ne x Ne (only when requested)
};

GainSolution solve_observation_space(const MatrixXd& A, const MatrixXd& innov, const RowGeometry& geom, bool want_m,
                                     int step) {
  const Eigen::Index p = A.rows();
  MatrixXd S = MatrixXd::Zero(p, p);
  S.selfadjointView<Eigen::Lower>().rankUpdate(A);
  S.triangularView<Eigen::StrictlyUpper>() = S.transpose();
  geom.add_r(S);
  Eigen::LLT<MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) {
    const double jitter = 1e-8 * S.diagonal().mean();
    S.diagonal().array() += jitter;
    llt.compute(S);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("innovation covariance not positive definite at augmented step " + std::to_string(step));
    }
  }
  GainSolution sol;
  sol.Z = llt.solve(innov);
  if (want_m) sol.M = A.transpose() * sol.Z;
  return sol;
}

GainSolution solve_ensemble_space(const MatrixXd& A, const MatrixXd& innov, const RowGeometry& geom, int step) {
  const MatrixXd RA = geom.apply_r_inverse(A);
  const MatrixXd RI = geom.apply_r_inverse(innov);
  MatrixXd K = A.transpose() * RA;
  K.diagonal().array() += 1.0;
  Eigen::LLT<MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("ensemble-space gain system not positive definite at augmented step " +
                         std::to_string(step));
  }
  GainSolution sol;
  sol.M = llt.solve(A.transpose() * RI);
  sol.Z = RI - RA * sol.M;
  return sol;
}

void finalise(const Slice& slice, int member, SmootherResult& out) {
  const auto idx = static_cast<std::size_t>(slice.step);
  if (slice.transform.size() == 0) {
    out.draw[idx] = slice.base.col(member);
    out.mean[idx] = slice.base.rowwise().mean();
  } else {
    out.draw[idx] = slice.base * slice.transform.col(member);
    out.mean[idx] = slice.base * slice.transform.rowwise().mean();
  }
}

}  // namespace

SmootherResult enks_draw(const ModelSpec& spec, const StaticParams& params, std::span<const Velocity> velocities,
                         const ObservationSet& obs, const CompleteData& complete, const SmootherConfig& config,
                         std::uint64_t seed) {
  config.validate();
  const TimeGrid& tg = spec.time;
  const int steps = tg.steps();
  if (static_cast<int>(velocities.size()) != steps) throw ConfigError("velocity path does not cover the time grid");
  const int ne = config.ensemble_size;
  const int n_cells = spec.cells();
  const int dim = spec.state_dim();
  const int lag_steps = config.lag * (tg.imputed_steps + 1);
  const double scale = std::sqrt(static_cast<double>(ne - 1));
  const double w_theta = inverse_or_zero(spec.hyper.theta_step_precision());
  const double sd_theta = std::sqrt(w_theta);
  const double sd_source = std::sqrt(inverse_or_zero(spec.hyper.source_step_precision()));

  bool use_transform = false;
  switch (config.lag_update) {
    case LagUpdate::kTransform: use_transform = true; break;
    case LagUpdate::kDirect: use_transform = false; break;
    case LagUpdate::kAuto:
      use_transform = static_cast<double>(ne) * ne < 2.0 * dim * std::max(1, spec.obs_width());
      break;
  }

  SmootherResult out;
  out.draw.assign(static_cast<std::size_t>(steps), VectorXd());
  out.mean.assign(static_cast<std::size_t>(steps), VectorXd());
  out.member = static_cast<int>(Rng(seed, Stream::kEnksSelect).below(static_cast<std::uint64_t>(ne)));

  std::deque<Slice> window;
  {
    Slice first;
    first.step = 0;
    first.base.resize(dim, ne);
    const double sd_t = std::sqrt(spec.priors.theta0.variance);
    const double sd_s = std::sqrt(spec.priors.source0.variance);
    const double m_t = params.mu + spec.priors.theta0.mean;
    const double m_s = spec.priors.source0.mean;
    parallel_for(ne, config.threads, [&](int begin, int end) {
      for (int j = begin; j < end; ++j) {
        Rng rng(seed, Stream::kEnksInitial, {static_cast<std::uint64_t>(j)});
        double* col = first.base.col(j).data();
        for (int r = 0; r < n_cells; ++r) col[r] = m_t + sd_t * rng.normal();
        for (int r = 0; r < n_cells; ++r) col[n_cells + r] = m_s + sd_s * rng.normal();
      }
    });
    window.push_back(std::move(first));
  }

  MatrixXd deterministic(dim, ne);
  for (int s = 1; s < steps; ++s) {
    // The newest slice stays as the propagation source even when it has left the lag window.
    while (window.size() > 1 && window.front().step < s - lag_steps) {
      finalise(window.front(), out.member, out);
      window.pop_front();
    }
    const MatrixXd& prev = window.back().base;
    const Velocity nu = velocities[static_cast<std::size_t>(s - 1)];

    Slice current;
    current.step = s;
    current.base.resize(dim, ne);
    parallel_for(ne, config.threads, [&](int begin, int end) {
      for (int j = begin; j < end; ++j) {
        propagate_mean(spec, params, nu, prev.col(j), deterministic.col(j));
        Rng rng(seed, Stream::kEnksForecast, {static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(j)});
        const double* det = deterministic.col(j).data();
        double* col = current.base.col(j).data();
        for (int r = 0; r < n_cells; ++r) col[r] = det[r] + sd_theta * rng.normal();
        for (int r = n_cells; r < dim; ++r) col[r] = det[r] + sd_source * rng.normal();
      }
    });

    const int k = tg.obs_at_step[static_cast<std::size_t>(s)];
    if (k >= 0) {
      const ObservationRows rows = observation_rows(spec, obs, k, params, &complete);
      const int p = rows.size();
      if (p > 0) {
        const RowGeometry geom(rows, w_theta);
        const VectorXd det_mean = deterministic.rowwise().mean();
        const MatrixXd det_dev = (deterministic.colwise() - det_mean) / scale;

        MatrixXd A(p, ne);
        MatrixXd innov(p, ne);
        for (int i = 0; i < p; ++i) A.row(i) = det_dev.row(rows.cell[static_cast<std::size_t>(i)]);
        parallel_for(ne, config.threads, [&](int begin, int end) {
          for (int j = begin; j < end; ++j) {
            Rng rng(seed, Stream::kEnksPseudoObs, {static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(j)});
            for (int i = 0; i < p; ++i) {
              const double pseudo = current.base(rows.cell[static_cast<std::size_t>(i)], j) + rows.offset[i] +
                                    rng.normal() / std::sqrt(rows.precision[i]);
              innov(i, j) = rows.value[i] - pseudo;
            }
          }
        });

        bool ensemble_space = false;
        switch (config.solve) {
          case GainSolve::kObservationSpace: ensemble_space = false; break;
          case GainSolve::kEnsembleSpace: ensemble_space = true; break;
          case GainSolve::kAuto: ensemble_space = p > ne; break;
        }
        const GainSolution sol = ensemble_space ? solve_ensemble_space(A, innov, geom, s)
                                                : solve_observation_space(A, innov, geom, use_transform, s);

        // Lagged slices: x_l += S~_lt F' Z = D_l (A' Z).
        for (Slice& slice : window) {
          if (slice.step < s - lag_steps) continue;
          if (use_transform) {
            if (slice.transform.size() == 0) slice.transform = MatrixXd::Identity(ne, ne);
            const VectorXd row_mean = slice.transform.rowwise().mean();
            const MatrixXd centred = slice.transform.colwise() - row_mean;
            slice.transform.noalias() += centred * (sol.M / scale);
          } else {
            const VectorXd mean = slice.base.rowwise().mean();
            const MatrixXd cross = ((slice.base.colwise() - mean) / scale) * A.transpose();
            slice.base.noalias() += cross * sol.Z;
          }
        }
        // Current slice: x_t += (S~_tt + W) F' Z.
        if (use_transform) {
          current.base.noalias() += det_dev * sol.M;
        } else {
          const MatrixXd cross = det_dev * A.transpose();
          current.base.noalias() += cross * sol.Z;
        }
        for (int i = 0; i < p; ++i) {
          current.base.row(rows.cell[static_cast<std::size_t>(i)]) += w_theta * sol.Z.row(i);
        }
      }
    }
    window.push_back(std::move(current));
  }
  for (const Slice& slice : window) finalise(slice, out.member, out);
  return out;
}

Eigen::MatrixXd kalman_gain_deterministic(const Eigen::MatrixXd& deterministic, const Eigen::MatrixXd* slice,
                                          const Eigen::MatrixXd& F, const Eigen::VectorXd& W,
                                          const Eigen::VectorXd& V) {
  const auto ne = deterministic.cols();
  if (ne < 2) throw ConfigError("gain needs at least two members");
  const double denom = static_cast<double>(ne - 1);
  const MatrixXd det_dev = deterministic.colwise() - deterministic.rowwise().mean();
  const MatrixXd sigma_tt = det_dev * det_dev.transpose() / denom;
  MatrixXd inner = F * sigma_tt * F.transpose() + F * W.asDiagonal() * F.transpose();
  inner.diagonal() += V;
  Eigen::LLT<MatrixXd> llt(inner);
  if (llt.info() != Eigen::Success) throw NumericalError("gain inner matrix not positive definite");
  MatrixXd left;
  if (slice == nullptr) {
    left = (sigma_tt + MatrixXd(W.asDiagonal())) * F.transpose();
  } else {
    const MatrixXd slice_dev = slice->colwise() - slice->rowwise().mean();
    left = slice_dev * det_dev.transpose() / denom * F.transpose();
  }
  return llt.solve(left.transpose()).transpose();
}

}  // namespace stormfield
