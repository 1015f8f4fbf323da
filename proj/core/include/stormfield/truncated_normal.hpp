#pragma once

#include "stormfield/random.hpp"

namespace stormfield {

/// Standard normal CDF.
double normal_cdf(double x);
/// log Phi(x), accurate far into the lower tail.
double log_normal_cdf(double x);

/// Draw from N(mean, 1/precision) truncated to (lower, upper); either bound
/// may be infinite. Stays finite when the interval sits many standard
/// deviations from the mean. Throws std::invalid_argument for an empty
/// interval or non-positive precision, and NumericalError for a non-finite
/// mean or precision.
double sample_truncated_normal(double mean, double precision, double lower, double upper, Rng& rng);

struct TruncatedMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Mean and variance of the truncated normal (analytic).
TruncatedMoments truncated_normal_moments(double mean, double precision, double lower, double upper);

}  // namespace stormfield
