#include "stormfield/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "stormfield/errors.hpp"

namespace stormfield {
namespace {

bool finite(double v) { return std::isfinite(v); }

void require_positive(double v, const char* name) {
  if (!(v > 0.0)) throw ConfigError(std::string(name) + " must be positive");
}

}  // namespace

void StaticParams::validate() const {
  if (!finite(mu) || !finite(mu_radar) || !finite(alpha) || !finite(beta)) {
    throw ConfigError("static parameters must be finite");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie strictly inside (0, 1)");
}

void Hyperparams::validate() const {
  require_positive(phi_gauge, "phi_gauge");
  require_positive(phi_radar, "phi_radar");
  require_positive(phi_theta, "phi_theta");
  require_positive(phi_source, "phi_source");
  require_positive(phi_nu, "phi_nu");
  if (!(alpha_nu > 0.0 && alpha_nu < 1.0)) throw ConfigError("alpha_nu must lie inside (0, 1)");
  if (!finite(alpha_source) || !finite(beta_source)) throw ConfigError("source constants must be finite");
  if (imputed_steps < 0) throw ConfigError("imputed steps must be >= 0");
}

void Priors::validate() const {
  for (const auto* p : {&mu, &mu_radar, &alpha, &beta}) {
    if (!finite(p->mean) || !(p->variance > 0.0) || !finite(p->variance)) {
      throw ConfigError("static-parameter priors need finite means and positive variances");
    }
  }
  for (const auto* p : {&theta0, &source0}) {
    if (!finite(p->mean) || !(p->variance >= 0.0)) throw ConfigError("initial-state priors are invalid");
  }
  if (!(nu0_variance >= 0.0) || !finite(nu0_mean.x) || !finite(nu0_mean.y)) {
    throw ConfigError("velocity prior is invalid");
  }
}

void ObservationSet::set(int t, int column, ObsFlag f, double v) {
  flags[static_cast<std::size_t>(t) * static_cast<std::size_t>(width()) + static_cast<std::size_t>(column)] = f;
  value(t, column) = v;
}

ObservationSet ObservationSet::empty(int times, int cells, std::vector<int> gauge_cells,
                                     std::vector<std::string> gauge_ids) {
  ObservationSet obs;
  obs.times = times;
  obs.cells = cells;
  obs.gauge_cells = std::move(gauge_cells);
  if (gauge_ids.empty()) {
    for (std::size_t g = 0; g < obs.gauge_cells.size(); ++g) gauge_ids.push_back("g" + std::to_string(g + 1));
  }
  obs.gauge_ids = std::move(gauge_ids);
  obs.value = Eigen::MatrixXd::Constant(times, obs.width(), std::numeric_limits<double>::quiet_NaN());
  obs.flags.assign(static_cast<std::size_t>(times) * static_cast<std::size_t>(obs.width()), ObsFlag::kMissing);
  return obs;
}

void ObservationSet::validate() const {
  if (times < 0 || cells <= 0) throw DataError("observation set has invalid dimensions");
  if (gauge_ids.size() != gauge_cells.size()) throw DataError("gauge ids and cells differ in length");
  if (value.rows() != times || value.cols() != width()) throw DataError("observation matrix has wrong shape");
  if (flags.size() != static_cast<std::size_t>(times) * static_cast<std::size_t>(width())) {
    throw DataError("observation flags have wrong length");
  }
  for (int cell : gauge_cells) {
    if (cell < 0 || cell >= cells) throw DataError("gauge cell " + std::to_string(cell) + " outside lattice");
  }
  for (int t = 0; t < times; ++t) {
    for (int c = 0; c < width(); ++c) {
      const double v = value(t, c);
      switch (flag(t, c)) {
        case ObsFlag::kPositive:
          if (!(v > 0.0) || !finite(v)) {
            throw DataError("positive observation at time " + std::to_string(t) + " column " + std::to_string(c) +
                            " is not strictly positive");
          }
          break;
        case ObsFlag::kCensored:
          if (v != 0.0) throw DataError("censored observation must carry value 0");
          break;
        case ObsFlag::kMissing:
          break;
      }
    }
  }
}

TimeGrid time_map(int times, int imputed_steps) {
  if (times < 1) throw ConfigError("need at least one observation time");
  if (imputed_steps < 0) throw ConfigError("imputed steps must be >= 0");
  TimeGrid grid;
  grid.times = times;
  grid.imputed_steps = imputed_steps;
  grid.augmented = imputed_steps * (times - 1) + times;
  grid.obs_at_step.assign(static_cast<std::size_t>(grid.augmented + 1), -1);
  for (int k = 0; k < times; ++k) {
    const int step = 1 + k * (imputed_steps + 1);
    grid.obs_step.push_back(step);
    grid.obs_at_step[static_cast<std::size_t>(step)] = k;
  }
  return grid;
}

double transform_obs(double rate) {
  if (!(rate >= 0.0)) throw std::domain_error("rain rate must be non-negative");
  return std::log1p(rate);
}

double inverse_transform(double y) {
  if (!(y >= 0.0)) throw std::domain_error("transformed value must be non-negative");
  return std::expm1(y);
}

void ModelSpec::validate() const {
  hyper.validate();
  priors.validate();
  if (time.imputed_steps != hyper.imputed_steps) {
    throw ConfigError("time grid and hyperparameters disagree on imputed steps");
  }
  for (int cell : gauge_cells) {
    if (cell < 0 || cell >= cells()) throw ConfigError("gauge cell outside lattice");
  }
}

CompleteData complete_from_observed(const ObservationSet& obs, double fill) {
  CompleteData data(static_cast<std::size_t>(obs.times));
  for (int t = 0; t < obs.times; ++t) {
    Eigen::VectorXd& y = data[static_cast<std::size_t>(t)];
    y = obs.value.row(t).transpose();
    for (int c = 0; c < obs.width(); ++c) {
      if (obs.flag(t, c) == ObsFlag::kCensored) y[c] = fill;
    }
  }
  return data;
}

void propagate_mean(const ModelSpec& spec, const StaticParams& params, Velocity nu,
                    const Eigen::Ref<const Eigen::VectorXd>& prev, Eigen::Ref<Eigen::VectorXd> next) {
  const int n_cells = spec.cells();
  const Lattice& lattice = spec.lattice;
  const StencilWeights g = theta_stencil(params.alpha, params.beta, nu);
  const StencilWeights gs = source_stencil(spec.hyper.alpha_source, spec.hyper.beta_source);
  const double mu = params.mu;
  const double* th = prev.data();
  const double* src = prev.data() + n_cells;
  double* out_th = next.data();
  double* out_src = next.data() + n_cells;
  for (int r = 0; r < n_cells; ++r) {
    const Neighbors& nb = lattice.neighbors(r);
    out_th[r] = mu + g.center * (th[r] - mu) + g.east * (th[nb.east] - mu) + g.west * (th[nb.west] - mu) +
                g.north * (th[nb.north] - mu) + g.south * (th[nb.south] - mu) + src[r];
    out_src[r] = gs.center * src[r] + gs.east * src[nb.east] + gs.west * src[nb.west] + gs.north * src[nb.north] +
                 gs.south * src[nb.south];
  }
}

ObservationRows observation_rows(const ModelSpec& spec, const ObservationSet& obs, int k,
                                 const StaticParams& params, const CompleteData* complete) {
  ObservationRows rows;
  const int width = obs.width();
  const int n_cells = obs.cells;
  std::vector<double> prec, offset, value;
  for (int c = 0; c < width; ++c) {
    const ObsFlag f = obs.flag(k, c);
    if (f == ObsFlag::kMissing) continue;
    const bool radar = c < n_cells;
    rows.column.push_back(c);
    rows.cell.push_back(radar ? c : spec.gauge_cells[static_cast<std::size_t>(c - n_cells)]);
    prec.push_back(radar ? spec.hyper.phi_radar : spec.hyper.phi_gauge);
    offset.push_back(radar ? params.mu_radar : 0.0);
    value.push_back(complete ? (*complete)[static_cast<std::size_t>(k)][c] : obs.value(k, c));
  }
  rows.precision = Eigen::Map<Eigen::VectorXd>(prec.data(), static_cast<Eigen::Index>(prec.size()));
  rows.offset = Eigen::Map<Eigen::VectorXd>(offset.data(), static_cast<Eigen::Index>(offset.size()));
  rows.value = Eigen::Map<Eigen::VectorXd>(value.data(), static_cast<Eigen::Index>(value.size()));
  return rows;
}

Eigen::SparseMatrix<double> DlmComponents::transition(Velocity nu) const {
  const int n_cells = lattice->cells();
  const EvolutionOperator g = build_theta_evolution(params.alpha, params.beta, nu, *lattice);
  const EvolutionOperator gs = build_source_evolution(hyper.alpha_source, hyper.beta_source, *lattice);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(11 * n_cells));
  for (int r = 0; r < n_cells; ++r) {
    for (SparseMatrixRM::InnerIterator it(g.csr(), r); it; ++it) triplets.emplace_back(r, it.col(), it.value());
    triplets.emplace_back(r, n_cells + r, 1.0);
    for (SparseMatrixRM::InnerIterator it(gs.csr(), r); it; ++it) {
      triplets.emplace_back(n_cells + r, n_cells + it.col(), it.value());
    }
  }
  Eigen::SparseMatrix<double> out(2 * n_cells, 2 * n_cells);
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

DlmComponents assemble_dlm(const StaticParams& params, const Hyperparams& hyper, const Lattice& lattice,
                           const std::vector<int>& gauge_cells) {
  hyper.validate();
  const int n_cells = lattice.cells();
  const int n_gauges = static_cast<int>(gauge_cells.size());
  for (int cell : gauge_cells) {
    if (cell < 0 || cell >= n_cells) throw ConfigError("gauge cell outside lattice");
  }
  DlmComponents dlm;
  dlm.lattice = &lattice;
  dlm.params = params;
  dlm.hyper = hyper;

  std::vector<Eigen::Triplet<double>> f;
  f.reserve(static_cast<std::size_t>(n_cells + n_gauges));
  for (int r = 0; r < n_cells; ++r) f.emplace_back(r, r, 1.0);
  for (int g = 0; g < n_gauges; ++g) f.emplace_back(n_cells + g, gauge_cells[static_cast<std::size_t>(g)], 1.0);
  dlm.F.resize(n_cells + n_gauges, 2 * n_cells);
  dlm.F.setFromTriplets(f.begin(), f.end());

  dlm.V.resize(n_cells + n_gauges);
  dlm.V.head(n_cells).setConstant(1.0 / hyper.phi_radar);
  dlm.V.tail(n_gauges).setConstant(1.0 / hyper.phi_gauge);
  dlm.W.resize(2 * n_cells);
  dlm.W.head(n_cells).setConstant(1.0 / hyper.theta_step_precision());
  dlm.W.tail(n_cells).setConstant(1.0 / hyper.source_step_precision());
  return dlm;
}

}  // namespace stormfield
