#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "stormfield/enks.hpp"
#include "stormfield/errors.hpp"
#include "stormfield/random.hpp"

using namespace stormfield;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

struct Problem {
  ModelSpec spec;
  StaticParams params;
  SimulationOutput sim;
};

// Small problem with gauges, imputed steps and a few missing entries.
Problem make_problem(int n, int times, int imputed, std::uint64_t seed) {
  Problem p{fixture::small_spec(n, times, imputed, {0, n + 1}), {0.3, 0.1, 0.8, 0.1}, {}};
  p.sim = fixture::simulate(p.spec, p.params, seed);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  p.sim.observed.set(0, 1, ObsFlag::kMissing, nan);
  p.sim.complete[0][1] = nan;
  if (times > 1) {
    p.sim.observed.set(1, n * n, ObsFlag::kMissing, nan);
    p.sim.complete[1][n * n] = nan;
  }
  return p;
}

oracle::JointGaussianResult oracle_moments(const Problem& p) {
  return oracle::condition_joint(p.spec, p.params, p.sim.paths.velocities, p.sim.observed, p.sim.complete);
}

SmootherResult run(const Problem& p, const SmootherConfig& config, std::uint64_t seed) {
  return enks_draw(p.spec, p.params, p.sim.paths.velocities, p.sim.observed, p.sim.complete, config, seed);
}

}  // namespace

TEST_CASE("gain from a hand-computed deterministic ensemble") {
  MatrixXd det(2, 3);
  det << 1, 2, 3, 0, 0, 3;
  MatrixXd F(1, 2);
  F << 1, 0;
  const VectorXd W = (VectorXd(2) << 0.5, 0.2).finished();
  const VectorXd V = VectorXd::Constant(1, 0.25);
  // Sigma_tt = [[1, 1.5], [1.5, 3]], so F (Sigma + W) F' + V = 1.75.
  const MatrixXd k_tt = kalman_gain_deterministic(det, nullptr, F, W, V);
  CHECK(k_tt(0, 0) == doctest::Approx(1.5 / 1.75).epsilon(1e-14));
  CHECK(k_tt(1, 0) == doctest::Approx(1.5 / 1.75).epsilon(1e-14));

  MatrixXd slice(2, 3);
  slice << 0, 1, 2, 1, 1, 4;
  const MatrixXd k_lt = kalman_gain_deterministic(det, &slice, F, W, V);
  CHECK(k_lt(0, 0) == doctest::Approx(1.0 / 1.75).epsilon(1e-14));
  CHECK(k_lt(1, 0) == doctest::Approx(1.5 / 1.75).epsilon(1e-14));

  CHECK_THROWS_AS(kalman_gain_deterministic(det.leftCols(1), nullptr, F, W, V), ConfigError);
}

TEST_CASE("deterministic-ensemble gain matches the stochastic-ensemble gain for large ensembles") {
  const int d = 4;
  const int ne = 40000;
  MatrixXd L = MatrixXd::Random(d, d) * 0.5;
  L.diagonal().array() += 1.0;
  const VectorXd W = (VectorXd(d) << 0.3, 0.1, 0.2, 0.05).finished();
  MatrixXd F = MatrixXd::Zero(2, d);
  F(0, 0) = 1.0;
  F(1, 2) = 1.0;
  const VectorXd V = (VectorXd(2) << 0.4, 0.1).finished();
  Rng rng(8, Stream::kTest, {});
  MatrixXd det(d, ne), stoch(d, ne);
  for (int j = 0; j < ne; ++j) {
    VectorXd z(d), e(d);
    for (int i = 0; i < d; ++i) z[i] = rng.normal();
    for (int i = 0; i < d; ++i) e[i] = std::sqrt(W[i]) * rng.normal();
    det.col(j) = L * z;
    stoch.col(j) = det.col(j) + e;
  }
  const MatrixXd k_det = kalman_gain_deterministic(det, nullptr, F, W, V);
  // Stochastic gain: Sigma F' (F Sigma F' + V)^-1 with Sigma the sample covariance of stoch.
  const MatrixXd dev = stoch.colwise() - stoch.rowwise().mean();
  const MatrixXd sigma = dev * dev.transpose() / (ne - 1);
  MatrixXd inner = F * sigma * F.transpose();
  inner.diagonal() += V;
  const MatrixXd k_stoch = (sigma * F.transpose()) * inner.inverse();
  // Exact gain with Sigma = L L' + W.
  const MatrixXd sigma_true = L * L.transpose() + MatrixXd(W.asDiagonal());
  MatrixXd inner_true = F * sigma_true * F.transpose();
  inner_true.diagonal() += V;
  const MatrixXd k_true = sigma_true * F.transpose() * inner_true.inverse();
  CHECK((k_det - k_true).cwiseAbs().maxCoeff() < 0.03);
  CHECK((k_stoch - k_true).cwiseAbs().maxCoeff() < 0.03);
  CHECK((k_det - k_stoch).cwiseAbs().maxCoeff() < 0.03);
}

TEST_CASE("exact smoother matches brute-force conditioning") {
  for (int imputed : {0, 2}) {
    const Problem p = make_problem(3, 3, imputed, 40 + static_cast<std::uint64_t>(imputed));
    const auto ref = oracle_moments(p);
    const ExactSmootherResult ex =
        exact_ffbs(p.spec, p.params, p.sim.paths.velocities, p.sim.observed, p.sim.complete, 1, false);
    REQUIRE(ex.smoothed_mean.size() == ref.smoothed_mean.size());
    for (std::size_t s = 0; s < ref.smoothed_mean.size(); ++s) {
      CHECK((ex.smoothed_mean[s] - ref.smoothed_mean[s]).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((ex.smoothed_cov[s] - ref.smoothed_cov[s]).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((ex.filtered_mean[s] - ref.filtered_mean[s]).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((ex.filtered_cov[s] - ref.filtered_cov[s]).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("FFBS draws have the smoothed moments") {
  const Problem p = make_problem(3, 3, 1, 7);
  const auto ref = oracle_moments(p);
  const int draws = 3000;
  const std::size_t steps = ref.smoothed_mean.size();
  std::vector<VectorXd> sum(steps, VectorXd::Zero(18));
  std::vector<MatrixXd> outer(steps, MatrixXd::Zero(18, 18));
  for (int r = 0; r < draws; ++r) {
    const auto ex = exact_ffbs(p.spec, p.params, p.sim.paths.velocities, p.sim.observed, p.sim.complete,
                               static_cast<std::uint64_t>(r), true);
    for (std::size_t s = 0; s < steps; ++s) {
      const VectorXd e = ex.draw[s] - ref.smoothed_mean[s];
      sum[s] += e;
      outer[s] += e * e.transpose();
    }
  }
  for (std::size_t s = 0; s < steps; ++s) {
    const VectorXd sd = ref.smoothed_cov[s].diagonal().cwiseSqrt();
    const VectorXd z = (sum[s] / draws).cwiseQuotient(sd) * std::sqrt(static_cast<double>(draws));
    CHECK(z.cwiseAbs().maxCoeff() < 4.0);
    const VectorXd ratio = (outer[s] / draws).diagonal().cwiseQuotient(ref.smoothed_cov[s].diagonal());
    CHECK((ratio.array() - 1.0).abs().maxCoeff() < 0.12);
    // Off-diagonal structure: correlation errors of order 1/sqrt(draws).
    const MatrixXd corr_draw = (outer[s] / draws).array() / (sd * sd.transpose()).array();
    const MatrixXd corr_ref = ref.smoothed_cov[s].array() / (sd * sd.transpose()).array();
    CHECK((corr_draw - corr_ref).cwiseAbs().maxCoeff() < 0.1);
  }
}

TEST_CASE("exact smoother refuses large states") {
  const ModelSpec spec = fixture::small_spec(17, 1);
  const ObservationSet obs = ObservationSet::empty(1, 289, {});
  const CompleteData complete = complete_from_observed(obs, -0.5);
  const std::vector<Velocity> nu(2);
  CHECK_THROWS_AS(exact_ffbs(spec, fixture::truth(), nu, obs, complete, 1), ConfigError);
}

TEST_CASE("EnKS ensemble means converge to the exact moments") {
  const Problem p = make_problem(3, 4, 1, 12);
  const auto ref = oracle_moments(p);
  SmootherConfig cfg;
  cfg.ensemble_size = 6000;

  SUBCASE("full lag gives smoothed means") {
    cfg.lag = 3;
    const auto r = run(p, cfg, 5);
    for (std::size_t s = 0; s < ref.smoothed_mean.size(); ++s) {
      const VectorXd z = (r.mean[s] - ref.smoothed_mean[s]).cwiseQuotient(ref.smoothed_cov[s].diagonal().cwiseSqrt());
      CHECK(z.cwiseAbs().maxCoeff() < 0.1);
    }
  }
  SUBCASE("zero lag gives filtered means") {
    cfg.lag = 0;
    const auto r = run(p, cfg, 5);
    for (std::size_t s = 0; s < ref.filtered_mean.size(); ++s) {
      const VectorXd z = (r.mean[s] - ref.filtered_mean[s]).cwiseQuotient(ref.filtered_cov[s].diagonal().cwiseSqrt());
      CHECK(z.cwiseAbs().maxCoeff() < 0.1);
    }
  }
}

TEST_CASE("EnKS selected-member draws are calibrated") {
  const Problem p = make_problem(3, 3, 0, 31);
  const auto ref = oracle_moments(p);
  SmootherConfig cfg;
  cfg.ensemble_size = 300;
  cfg.lag = 2;
  const int reps = 600;
  const std::size_t steps = ref.smoothed_mean.size();
  double zsum = 0.0, z2 = 0.0, count = 0.0;
  for (int r = 0; r < reps; ++r) {
    const auto res = run(p, cfg, 1000 + static_cast<std::uint64_t>(r));
    for (std::size_t s = 0; s < steps; ++s) {
      const VectorXd z = (res.draw[s] - ref.smoothed_mean[s]).cwiseQuotient(ref.smoothed_cov[s].diagonal().cwiseSqrt());
      zsum += z.sum();
      z2 += z.squaredNorm();
      count += static_cast<double>(z.size());
    }
  }
  CHECK(std::abs(zsum / count) < 0.1);
  CHECK(std::abs(z2 / count - 1.0) < 0.15);
}

TEST_CASE("gain routes agree") {
  const Problem p = make_problem(4, 4, 1, 3);
  SmootherConfig base;
  base.ensemble_size = 12;  // fewer members than observation rows
  base.lag = 2;
  std::vector<SmootherResult> results;
  for (GainSolve solve : {GainSolve::kObservationSpace, GainSolve::kEnsembleSpace}) {
    for (LagUpdate lag : {LagUpdate::kDirect, LagUpdate::kTransform}) {
      SmootherConfig cfg = base;
      cfg.solve = solve;
      cfg.lag_update = lag;
      results.push_back(run(p, cfg, 77));
    }
  }
  for (std::size_t i = 1; i < results.size(); ++i) {
    CHECK(results[i].member == results[0].member);
    for (std::size_t s = 0; s < results[0].draw.size(); ++s) {
      CHECK((results[i].draw[s] - results[0].draw[s]).cwiseAbs().maxCoeff() < 1e-9);
      CHECK((results[i].mean[s] - results[0].mean[s]).cwiseAbs().maxCoeff() < 1e-9);
    }
  }
}

TEST_CASE("EnKS output does not depend on the thread count") {
  const Problem p = make_problem(4, 3, 1, 9);
  SmootherConfig cfg;
  cfg.ensemble_size = 50;
  const auto one = run(p, cfg, 4);
  cfg.threads = 3;
  const auto three = run(p, cfg, 4);
  for (std::size_t s = 0; s < one.draw.size(); ++s) {
    CHECK((one.draw[s] - three.draw[s]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((one.mean[s] - three.mean[s]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("selected member is uniform") {
  const Problem p = make_problem(3, 1, 0, 2);
  SmootherConfig cfg;
  cfg.ensemble_size = 5;
  std::vector<int> hits(5, 0);
  const int reps = 2500;
  for (int r = 0; r < reps; ++r) hits[static_cast<std::size_t>(run(p, cfg, static_cast<std::uint64_t>(r)).member)] += 1;
  double chi2 = 0.0;
  for (int h : hits) chi2 += (h - 500.0) * (h - 500.0) / 500.0;
  CHECK(chi2 < 18.47);  // chi-square(4) 99.9% quantile
}

TEST_CASE("with no observations the ensemble follows the prior") {
  ModelSpec spec = fixture::small_spec(3, 3, 0);
  const StaticParams params{0.5, 0.0, 0.8, 0.1};
  const ObservationSet obs = ObservationSet::empty(3, 9, {});
  const CompleteData complete = complete_from_observed(obs, 0.0);
  const std::vector<Velocity> nu(4);
  SmootherConfig cfg;
  cfg.ensemble_size = 4000;
  const auto r = enks_draw(spec, params, nu, obs, complete, cfg, 3);
  const auto ref = oracle::condition_joint(spec, params, nu, obs, complete);
  for (std::size_t s = 0; s < r.mean.size(); ++s) {
    const VectorXd z = (r.mean[s] - ref.smoothed_mean[s]).cwiseQuotient(ref.smoothed_cov[s].diagonal().cwiseSqrt());
    CHECK(z.cwiseAbs().maxCoeff() < 0.1);
    CHECK((ref.smoothed_mean[s].head(9).array() - 0.5).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("configuration errors") {
  const Problem p = make_problem(3, 2, 0, 1);
  SmootherConfig cfg;
  cfg.ensemble_size = 1;
  CHECK_THROWS_AS(run(p, cfg, 1), ConfigError);
  cfg = SmootherConfig{};
  cfg.lag = -1;
  CHECK_THROWS_AS(run(p, cfg, 1), ConfigError);
  cfg = SmootherConfig{};
  const std::vector<Velocity> short_path(2);
  CHECK_THROWS_AS(enks_draw(p.spec, p.params, short_path, p.sim.observed, p.sim.complete, cfg, 1), ConfigError);
}
