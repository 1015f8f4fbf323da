#include "stormfield/truncated_normal.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <utility>

#include <boost/math/special_functions/erf.hpp>

#include "stormfield/errors.hpp"

namespace stormfield {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Standard normal truncated to [a, b] with 0 <= a < b (b may be infinite).
double sample_one_sided(double a, double b, Rng& rng) {
  // Uniform proposal is efficient when the density barely varies over [a, b].
  if (std::isfinite(b) && (b - a) * (a + b) < 2.0) {
    for (;;) {
      const double z = a + (b - a) * rng.uniform();
      if (rng.uniform() <= std::exp(0.5 * (a * a - z * z))) return z;
    }
  }
  // Exponential proposal with the optimal rate for the tail at a.
  const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double z = a + rng.exponential(rate);
    if (z > b) continue;
    const double d = z - rate;
    if (rng.uniform() <= std::exp(-0.5 * d * d)) return z;
  }
}

// Standard normal truncated to [a, b] with a < 0 < b.
double sample_central(double a, double b, Rng& rng) {
  const double mass = normal_cdf(b) - normal_cdf(a);
  if (mass >= 0.25) {
    for (;;) {
      const double z = rng.normal();
      if (z >= a && z <= b) return z;
    }
  }
  // Narrow interval around the mode: inverse CDF is well conditioned here.
  const double lo = normal_cdf(a);
  const double u = lo + mass * rng.uniform();
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double log_normal_cdf(double x) {
  if (x > -30.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
  // Asymptotic expansion of the Mills ratio for the far lower tail.
  const double z = -x;
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
  return -0.5 * z2 - std::log(z) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

double sample_truncated_normal(double mean, double precision, double lower, double upper, Rng& rng) {
  if (!(precision > 0.0)) throw std::invalid_argument("truncated normal needs positive precision");
  if (!(lower < upper)) throw std::invalid_argument("truncated normal needs lower < upper");
  if (!std::isfinite(mean) || !std::isfinite(precision)) throw NumericalError("truncated normal with non-finite mean or precision");
  const double sd = 1.0 / std::sqrt(precision);
  double a = (lower - mean) / sd;
  double b = (upper - mean) / sd;
  if (a == -kInf && b == kInf) return mean + sd * rng.normal();
  if (a < 0.0 && b > 0.0) return mean + sd * sample_central(a, b, rng);
  // Interval on one side of the mean: reflect to the upper side.
  const bool flip = b <= 0.0;
  if (flip) {
    std::swap(a, b);
    a = -a;
    b = -b;
  }
  const double z = sample_one_sided(a, b, rng);
  return mean + sd * (flip ? -z : z);
}

TruncatedMoments truncated_normal_moments(double mean, double precision, double lower, double upper) {
  const double sd = 1.0 / std::sqrt(precision);
  const double a = (lower - mean) / sd;
  const double b = (upper - mean) / sd;
  const auto pdf = [](double z) {
    return std::isfinite(z) ? std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi) : 0.0;
  };
  // Work in the tail that keeps the normalising mass well conditioned.
  double mass;
  if (a > 0.0) {
    mass = normal_cdf(-a) - normal_cdf(-b);
  } else {
    mass = normal_cdf(b) - normal_cdf(a);
  }
  const double pa = pdf(a);
  const double pb = pdf(b);
  const double ta = std::isfinite(a) ? a * pa : 0.0;
  const double tb = std::isfinite(b) ? b * pb : 0.0;
  const double shift = (pa - pb) / mass;
  TruncatedMoments m;
  m.mean = mean + sd * shift;
  m.variance = sd * sd * (1.0 + (ta - tb) / mass - shift * shift);
  return m;
}

}  // namespace stormfield
