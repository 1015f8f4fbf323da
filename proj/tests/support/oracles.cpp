#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int wrap(int a, int n) { return ((a % n) + n) % n; }

template <typename F>
double integrate(F f, double lo, double hi) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 15, 1e-14);
}

MatrixXd five_point(int n, double c, double e, double w, double no, double so) {
  const int N = n * n;
  MatrixXd g = MatrixXd::Zero(N, N);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int r = j * n + i;
      g(r, r) += c;
      g(r, j * n + wrap(i + 1, n)) += e;
      g(r, j * n + wrap(i - 1, n)) += w;
      g(r, wrap(j + 1, n) * n + i) += no;
      g(r, wrap(j - 1, n) * n + i) += so;
    }
  }
  return g;
}

}  // namespace

MatrixXd theta_operator(int n, double alpha, double beta, double nu_x, double nu_y) {
  return five_point(n, alpha * (1 - 4 * beta), alpha * (beta - nu_x), alpha * (beta + nu_x), alpha * (beta - nu_y),
                    alpha * (beta + nu_y));
}

MatrixXd source_operator(int n, double alpha_star, double beta_star) {
  const double b = alpha_star * beta_star;
  return five_point(n, alpha_star * (1 - 4 * beta_star), b, b, b, b);
}

double log_joint(const JointInputs& in) {
  const auto& spec = *in.spec;
  const auto& obs = *in.obs;
  const auto& pr = spec.priors;
  const auto& hy = spec.hyper;
  const auto& p = in.params;
  const int n = spec.lattice.n();
  const int N = n * n;
  const double phi = hy.phi_theta * (hy.imputed_steps + 1);

  double lp = 0.0;
  const auto gauss = [](double x, double m, double var) { return -0.5 * (x - m) * (x - m) / var; };
  lp += gauss(p.mu, pr.mu.mean, pr.mu.variance);
  lp += gauss(p.mu_radar, pr.mu_radar.mean, pr.mu_radar.variance);
  if (!(p.alpha > 0.0 && p.alpha < 1.0)) return -kInf;
  lp += gauss(p.alpha, pr.alpha.mean, pr.alpha.variance);
  lp += gauss(p.beta, pr.beta.mean, pr.beta.variance);

  for (int c = 0; c < N; ++c) lp += gauss(in.states[0][c], pr.theta0.mean + p.mu, pr.theta0.variance);

  lp += gauss(in.velocities[0].x, pr.nu0_mean.x, pr.nu0_variance);
  lp += gauss(in.velocities[0].y, pr.nu0_mean.y, pr.nu0_variance);
  for (std::size_t s = 1; s < in.velocities.size(); ++s) {
    lp += gauss(in.velocities[s].x, hy.alpha_nu * in.velocities[s - 1].x, 1.0 / hy.phi_nu);
    lp += gauss(in.velocities[s].y, hy.alpha_nu * in.velocities[s - 1].y, 1.0 / hy.phi_nu);
  }

  const VectorXd ones = VectorXd::Ones(N);
  for (std::size_t s = 1; s < in.states.size(); ++s) {
    const auto& nu = in.velocities[s - 1];
    const MatrixXd G = theta_operator(n, p.alpha, p.beta, nu.x, nu.y);
    const VectorXd prev = in.states[s - 1].head(N) - p.mu * ones;
    const VectorXd r = in.states[s].head(N) - p.mu * ones - G * prev - in.states[s - 1].tail(N);
    lp += -0.5 * phi * r.squaredNorm();
  }

  for (int k = 0; k < obs.times; ++k) {
    const VectorXd& x = in.states[static_cast<std::size_t>(spec.time.obs_step[static_cast<std::size_t>(k)])];
    const VectorXd& y = (*in.complete)[static_cast<std::size_t>(k)];
    for (int c = 0; c < obs.width(); ++c) {
      if (obs.flag(k, c) == stormfield::ObsFlag::kMissing) continue;
      if (c < N) {
        lp += -0.5 * hy.phi_radar * std::pow(y[c] - x[c] - p.mu_radar, 2);
      } else {
        lp += -0.5 * hy.phi_gauge * std::pow(y[c] - x[obs.gauge_cells[static_cast<std::size_t>(c - N)]], 2);
      }
    }
  }
  return lp;
}

Moments quadrature_moments(const std::function<double(double)>& log_density, double lo, double hi, double centre) {
  const double ref = log_density(centre);
  const auto dens = [&](double x) { return std::exp(log_density(x) - ref); };
  const double z = integrate(dens, lo, hi);
  const double m = integrate([&](double x) { return x * dens(x); }, lo, hi) / z;
  const double v = integrate([&](double x) { return (x - m) * (x - m) * dens(x); }, lo, hi) / z;
  return {m, v};
}

Moments2 quadrature_moments_2d(const std::function<double(double, double)>& log_density, Eigen::Vector2d lo,
                               Eigen::Vector2d hi, Eigen::Vector2d centre) {
  // Composite 30-point Gauss-Legendre product rule; the density is tabulated
  // once and every moment is taken from the same table.
  using rule = boost::math::quadrature::gauss<double, 30>;
  const int pieces = 12;
  const auto nodes = [&](double a, double b) {
    std::vector<std::pair<double, double>> out;
    const double h = (b - a) / pieces;
    for (int k = 0; k < pieces; ++k) {
      const double mid = a + (k + 0.5) * h;
      for (std::size_t i = 0; i < rule::abscissa().size(); ++i) {
        const double x = rule::abscissa()[i] * 0.5 * h;
        const double w = rule::weights()[i] * 0.5 * h;
        out.emplace_back(mid + x, w);
        if (x != 0.0) out.emplace_back(mid - x, w);
      }
    }
    return out;
  };
  const auto na = nodes(lo[0], hi[0]);
  const auto nb = nodes(lo[1], hi[1]);
  const double ref = log_density(centre[0], centre[1]);
  double z = 0.0;
  Eigen::Vector2d s1 = Eigen::Vector2d::Zero();
  std::vector<double> table;
  table.reserve(na.size() * nb.size());
  for (const auto& [a, wa] : na) {
    for (const auto& [b, wb] : nb) {
      const double w = wa * wb * std::exp(log_density(a, b) - ref);
      table.push_back(w);
      z += w;
      s1 += w * Eigen::Vector2d(a, b);
    }
  }
  Moments2 out;
  out.mean = s1 / z;
  out.cov.setZero();
  std::size_t idx = 0;
  for (const auto& [a, wa] : na) {
    for (const auto& [b, wb] : nb) {
      const Eigen::Vector2d d = Eigen::Vector2d(a, b) - out.mean;
      out.cov += table[idx++] * d * d.transpose();
    }
  }
  out.cov /= z;
  return out;
}

double log_censored_mass(double mean, double precision) {
  // P(Y <= 0) = Phi(c) with c = -sqrt(phi) mean. For a tail mass Phi(-|c|),
  // writing z = -|c| - u gives phi(c) int_0^inf exp(-|c| u - u^2 / 2) du,
  // which stays well scaled however far out the tail is.
  const double c = -std::sqrt(precision) * mean;
  const double a = std::abs(c);
  const double log_phi_c = -0.5 * c * c - 0.5 * std::log(2.0 * M_PI);
  const auto f = [a](double u) { return std::exp(-a * u - 0.5 * u * u); };
  const double upper = a > 1.0 ? 60.0 / a : 40.0;
  double total = 0.0;
  const int pieces = 16;
  for (int i = 0; i < pieces; ++i) {
    total += integrate(f, upper * i / pieces, upper * (i + 1) / pieces);
  }
  const double log_tail = log_phi_c + std::log(total);
  return c <= 0.0 ? log_tail : std::log1p(-std::exp(log_tail));
}

JointGaussianResult condition_joint(const stormfield::ModelSpec& spec, const stormfield::StaticParams& params,
                                    const std::vector<stormfield::Velocity>& velocities,
                                    const stormfield::ObservationSet& obs, const stormfield::CompleteData& complete) {
  const int n = spec.lattice.n();
  const int N = n * n;
  const int d = 2 * N;
  const int steps = spec.time.steps();
  const auto& hy = spec.hyper;
  const auto& pr = spec.priors;

  // x_s = m_s + sum_k B_{s,k} e_k with e_0 the initial deviation and e_k the
  // innovation at step k; build mean and covariance of the stacked states.
  VectorXd m(d * steps);
  MatrixXd transfer = MatrixXd::Zero(d * steps, d * steps);
  VectorXd e_var(d * steps);
  const double w_t = 1.0 / (hy.phi_theta * (hy.imputed_steps + 1));
  const double w_s = 1.0 / (hy.phi_source * (hy.imputed_steps + 1));
  for (int c = 0; c < N; ++c) {
    m[c] = params.mu + pr.theta0.mean;
    m[N + c] = pr.source0.mean;
    e_var[c] = pr.theta0.variance;
    e_var[N + c] = pr.source0.variance;
  }
  transfer.block(0, 0, d, d).setIdentity();
  const MatrixXd Gs = source_operator(n, hy.alpha_source, hy.beta_source);
  VectorXd muL = VectorXd::Zero(d);
  muL.head(N).setConstant(params.mu);
  for (int s = 1; s < steps; ++s) {
    const auto& nu = velocities[static_cast<std::size_t>(s - 1)];
    MatrixXd Gt = MatrixXd::Zero(d, d);
    Gt.topLeftCorner(N, N) = theta_operator(n, params.alpha, params.beta, nu.x, nu.y);
    Gt.topRightCorner(N, N).setIdentity();
    Gt.bottomRightCorner(N, N) = Gs;
    m.segment(s * d, d) = Gt * (m.segment((s - 1) * d, d) - muL) + muL;
    transfer.block(s * d, 0, d, d * steps) = Gt * transfer.block((s - 1) * d, 0, d, d * steps);
    transfer.block(s * d, s * d, d, d).setIdentity();
    e_var.segment(s * d, N).setConstant(w_t);
    e_var.segment(s * d + N, N).setConstant(w_s);
  }
  const MatrixXd P = transfer * e_var.asDiagonal() * transfer.transpose();

  // Observation rows, in time order.
  std::vector<int> row_state, row_time;
  std::vector<double> row_var, row_value;
  for (int k = 0; k < obs.times; ++k) {
    const int s = spec.time.obs_step[static_cast<std::size_t>(k)];
    for (int c = 0; c < obs.width(); ++c) {
      if (obs.flag(k, c) == stormfield::ObsFlag::kMissing) continue;
      const bool radar = c < N;
      const int cell = radar ? c : obs.gauge_cells[static_cast<std::size_t>(c - N)];
      row_state.push_back(s * d + cell);
      row_time.push_back(k);
      row_var.push_back(radar ? 1.0 / hy.phi_radar : 1.0 / hy.phi_gauge);
      row_value.push_back(complete[static_cast<std::size_t>(k)][c] - (radar ? params.mu_radar : 0.0));
    }
  }

  const auto condition_on = [&](int rows, VectorXd& mean, MatrixXd& cov) {
    mean = m;
    cov = P;
    if (rows == 0) return;
    MatrixXd Pxy(d * steps, rows), Pyy(rows, rows);
    VectorXd innov(rows);
    for (int a = 0; a < rows; ++a) {
      Pxy.col(a) = P.col(row_state[static_cast<std::size_t>(a)]);
      innov[a] = row_value[static_cast<std::size_t>(a)] - m[row_state[static_cast<std::size_t>(a)]];
      for (int b = 0; b < rows; ++b) {
        Pyy(a, b) = P(row_state[static_cast<std::size_t>(a)], row_state[static_cast<std::size_t>(b)]);
      }
      Pyy(a, a) += row_var[static_cast<std::size_t>(a)];
    }
    const Eigen::LDLT<MatrixXd> ldlt(Pyy);
    mean += Pxy * ldlt.solve(innov);
    cov -= Pxy * ldlt.solve(Pxy.transpose());
  };

  JointGaussianResult out;
  VectorXd mean;
  MatrixXd cov;
  condition_on(static_cast<int>(row_state.size()), mean, cov);
  for (int s = 0; s < steps; ++s) {
    out.smoothed_mean.push_back(mean.segment(s * d, d));
    out.smoothed_cov.push_back(cov.block(s * d, s * d, d, d));
  }
  for (int s = 0; s < steps; ++s) {
    // Observations at or before step s.
    int rows = 0;
    while (rows < static_cast<int>(row_state.size()) &&
           spec.time.obs_step[static_cast<std::size_t>(row_time[static_cast<std::size_t>(rows)])] <= s) {
      ++rows;
    }
    condition_on(rows, mean, cov);
    out.filtered_mean.push_back(mean.segment(s * d, d));
    out.filtered_cov.push_back(cov.block(s * d, s * d, d, d));
  }
  return out;
}

}  // namespace oracle
