#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "stormfield/analysis.hpp"

using namespace stormfield;
using Eigen::VectorXd;

namespace {

double gaussian_log_pdf(double y, double mean, double precision) {
  return -0.5 * std::log(2.0 * std::numbers::pi / precision) - 0.5 * precision * (y - mean) * (y - mean);
}

std::vector<TerminalDraw> terminal_draws(const ModelSpec& spec, int count, std::uint64_t seed) {
  std::vector<TerminalDraw> out;
  for (int d = 0; d < count; ++d) {
    const auto sim = fixture::simulate(spec, fixture::truth(), seed + static_cast<std::uint64_t>(d));
    out.push_back({10 * d + 3, fixture::truth(), sim.paths.velocities.back(), sim.paths.states.back()});
  }
  return out;
}

}  // namespace

TEST_CASE("Tobit contributions") {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> um(-4.0, 4.0), up(0.5, 200.0), uy(0.01, 5.0);
  for (int i = 0; i < 200; ++i) {
    const double mean = um(gen), prec = up(gen), y = uy(gen);
    CHECK(tobit_log_contribution(0.0, true, mean, prec) ==
          doctest::Approx(oracle::log_censored_mass(mean, prec)).epsilon(1e-10));
    CHECK(tobit_log_contribution(y, false, mean, prec) == doctest::Approx(gaussian_log_pdf(y, mean, prec)).epsilon(1e-12));
  }
  // A censored entry far below zero carries essentially no penalty; far above, a large one.
  CHECK(tobit_log_contribution(0.0, true, -5.0, 100.0) > -1e-12);
  CHECK(std::isfinite(tobit_log_contribution(0.0, true, 5.0, 100.0)));
  CHECK(tobit_log_contribution(0.0, true, 5.0, 100.0) == doctest::Approx(oracle::log_censored_mass(5.0, 100.0)).epsilon(1e-9));
}

TEST_CASE("observed and complete data log-likelihoods") {
  const ModelSpec spec = fixture::small_spec(4, 3, 1, {2, 7});
  const StaticParams p{0.1, -0.2, 0.8, 0.1};
  auto sim = fixture::simulate(spec, p, 12);
  sim.observed.set(1, 5, ObsFlag::kMissing, std::numeric_limits<double>::quiet_NaN());
  sim.complete[1][5] = std::numeric_limits<double>::quiet_NaN();
  double obs_ref = 0.0, comp_ref = 0.0;
  for (int k = 0; k < 3; ++k) {
    const VectorXd& x = sim.paths.states[static_cast<std::size_t>(spec.time.obs_step[static_cast<std::size_t>(k)])];
    for (int c = 0; c < sim.observed.width(); ++c) {
      const ObsFlag f = sim.observed.flag(k, c);
      if (f == ObsFlag::kMissing) continue;
      const bool radar = c < 16;
      const double mean = radar ? x[c] + p.mu_radar : x[spec.gauge_cells[static_cast<std::size_t>(c - 16)]];
      const double prec = radar ? spec.hyper.phi_radar : spec.hyper.phi_gauge;
      obs_ref += f == ObsFlag::kCensored ? oracle::log_censored_mass(mean, prec)
                                         : gaussian_log_pdf(sim.observed.value(k, c), mean, prec);
      comp_ref += gaussian_log_pdf(sim.complete[static_cast<std::size_t>(k)][c], mean, prec);
    }
  }
  CHECK(observed_data_loglik(spec, p, sim.paths.states, sim.observed) == doctest::Approx(obs_ref).epsilon(1e-10));
  CHECK(complete_data_loglik(spec, p, sim.paths.states, sim.observed, sim.complete) ==
        doctest::Approx(comp_ref).epsilon(1e-12));
}

TEST_CASE("DIC") {
  const std::vector<double> ll{-1.0, -2.0, -3.0};
  const DicResult r = dic(ll);
  CHECK(r.mean_deviance == doctest::Approx(4.0));
  CHECK(r.p_d == doctest::Approx(2.0));
  CHECK(r.dic == doctest::Approx(6.0));

  std::vector<double> shifted = ll;
  for (double& v : shifted) v -= 10.0;
  const DicResult s = dic(shifted);
  CHECK(s.p_d == doctest::Approx(r.p_d));
  CHECK(s.dic == doctest::Approx(r.dic + 20.0));

  const std::vector<double> flat(5, -7.0);
  CHECK(dic(flat).p_d == 0.0);
  CHECK(dic(flat).dic == doctest::Approx(14.0));

  const DicResult two = dic(std::vector<double>{-10.0, -12.0});
  CHECK(two.p_d == doctest::Approx(4.0));
  CHECK(two.dic == doctest::Approx(26.0));
  CHECK_THROWS_AS(dic(std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("quantiles interpolate linearly") {
  CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 0.5) == 2.5);
  CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 0.0) == 1.0);
  CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 1.0) == 4.0);
  std::vector<double> v(101);
  for (int i = 0; i <= 100; ++i) v[static_cast<std::size_t>(i)] = 100.0 - i;
  CHECK(quantile(v, 0.025) == doctest::Approx(2.5));
  CHECK(quantile(v, 0.975) == doctest::Approx(97.5));
  CHECK(quantile({5.0}, 0.3) == 5.0);
  CHECK_THROWS_AS(quantile({}, 0.5), std::invalid_argument);
}

TEST_CASE("velocity intervals in the state summary") {
  DrawStore store;
  store.steps = 2;
  store.cells = 1;
  for (int d = 0; d < 41; ++d) {
    store.velocities.push_back({Velocity{0.01 * d, -0.01 * d}, Velocity{1.0, 2.0}});
    store.theta.add({VectorXd::Constant(2, d - 20.0), VectorXd::Constant(2, 1.0)}, 1);
  }
  const StateSummary s = summarize_states(store);
  REQUIRE(s.nu_x.size() == 2);
  CHECK(s.nu_x[0].mean == doctest::Approx(0.2));
  CHECK(s.nu_x[0].lower == doctest::Approx(0.01));
  CHECK(s.nu_x[0].upper == doctest::Approx(0.39));
  CHECK(s.nu_y[0].lower == doctest::Approx(-0.39));
  CHECK(s.nu_y[1].mean == doctest::Approx(2.0));
  CHECK(s.mean(0, 0) == doctest::Approx(0.0).scale(1.0));
  CHECK(s.pr_positive(0, 0) == doctest::Approx(20.0 / 41.0));
  CHECK(s.pr_positive(1, 0) == 1.0);
  CHECK(s.sd(1, 0) == 0.0);
  CHECK_THROWS_AS(summarize_states(DrawStore{}), std::invalid_argument);
}

TEST_CASE("forecast does not depend on draw order or thread count") {
  const ModelSpec spec = fixture::small_spec(4, 3, 1);
  std::vector<TerminalDraw> draws = terminal_draws(spec, 12, 50);
  ForecastOptions opt;
  opt.horizon = 3;
  const ForecastSet a = forecast(spec, draws, opt, 8);
  CHECK(a.steps() == 6);
  CHECK(a.mean.rows() == 6);
  CHECK(a.paths.size() == 12);
  std::reverse(draws.begin(), draws.end());
  std::swap(draws[2], draws[7]);
  opt.threads = 3;
  const ForecastSet b = forecast(spec, draws, opt, 8);
  CHECK(a.draw_ids == b.draw_ids);
  CHECK(std::is_sorted(a.draw_ids.begin(), a.draw_ids.end()));
  CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.sd - b.sd).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.rate_mean - b.rate_mean).cwiseAbs().maxCoeff() == 0.0);
  const ForecastSet c = forecast(spec, draws, opt, 9);
  CHECK((a.mean - c.mean).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("forecast summaries are consistent with the paths") {
  const ModelSpec spec = fixture::small_spec(3, 2);
  const std::vector<TerminalDraw> draws = terminal_draws(spec, 25, 3);
  ForecastOptions opt;
  opt.horizon = 2;
  const ForecastSet f = forecast(spec, draws, opt, 1);
  for (int h = 0; h < f.steps(); ++h) {
    for (int c = 0; c < 9; ++c) {
      double m = 0.0, pos = 0.0, rate = 0.0;
      for (const auto& p : f.paths) {
        const double v = p[static_cast<std::size_t>(h)][c];
        m += v;
        pos += v > 0.0;
        rate += std::max(std::exp(v) - 1.0, 0.0);
      }
      CHECK(f.mean(h, c) == doctest::Approx(m / 25.0).epsilon(1e-12));
      CHECK(f.pr_positive(h, c) == doctest::Approx(pos / 25.0));
      CHECK(f.rate_mean(h, c) == doctest::Approx(rate / 25.0).epsilon(1e-12));
      CHECK(f.rate_mean(h, c) >= 0.0);
    }
  }
}

TEST_CASE("forecast innovations have the model variance") {
  const ModelSpec spec = fixture::small_spec(3, 2, 2);
  const auto base = terminal_draws(spec, 1, 77).front();
  std::vector<TerminalDraw> draws(3000, base);
  for (std::size_t d = 0; d < draws.size(); ++d) draws[d].iteration = static_cast<int>(d);
  ForecastOptions opt;
  opt.horizon = 1;
  const ForecastSet f = forecast(spec, draws, opt, 5);
  VectorXd expected(18);
  propagate_mean(spec, base.params, base.velocity, base.state, expected);
  const double w = 1.0 / (spec.hyper.phi_theta * 3.0);
  for (int c = 0; c < 9; ++c) {
    CHECK(std::abs(f.mean(0, c) - expected[c]) < 4.0 * std::sqrt(w / 3000.0));
    CHECK(std::abs(f.sd(0, c) * f.sd(0, c) / w - 1.0) < 0.1);
  }
}

TEST_CASE("noise-free forecast follows the mean recursion") {
  ModelSpec spec = fixture::small_spec(3, 2, 1);
  spec.hyper.phi_theta = std::numeric_limits<double>::infinity();
  spec.hyper.phi_source = std::numeric_limits<double>::infinity();
  spec.hyper.phi_nu = std::numeric_limits<double>::infinity();
  const auto draws = terminal_draws(spec, 2, 1);
  ForecastOptions opt;
  opt.horizon = 2;
  const ForecastSet f = forecast(spec, draws, opt, 5);
  for (std::size_t d = 0; d < 2; ++d) {
    VectorXd x = draws[d].state, next(18);
    Velocity nu = draws[d].velocity;
    for (int h = 0; h < 4; ++h) {
      propagate_mean(spec, draws[d].params, nu, x, next);
      x = next;
      nu = {spec.hyper.alpha_nu * nu.x, spec.hyper.alpha_nu * nu.y};
      CHECK((f.paths[d][static_cast<std::size_t>(h)] - x.head(9)).cwiseAbs().maxCoeff() < 1e-13);
    }
  }
}

TEST_CASE("forecast argument checks") {
  const ModelSpec spec = fixture::small_spec(3, 2);
  auto draws = terminal_draws(spec, 2, 1);
  ForecastOptions opt;
  opt.horizon = 0;
  CHECK_THROWS_AS(forecast(spec, draws, opt, 1), std::invalid_argument);
  opt.horizon = 1;
  CHECK_THROWS_AS(forecast(spec, std::span(draws).first(1), opt, 1), std::invalid_argument);
  draws[1].state = VectorXd::Zero(4);
  CHECK_THROWS_AS(forecast(spec, draws, opt, 1), std::invalid_argument);
}
