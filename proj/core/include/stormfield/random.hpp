#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace stormfield {

/// xoshiro256++ generator. Satisfies UniformRandomBitGenerator.
class Xoshiro256pp {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256pp(std::uint64_t seed = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()();

 private:
  std::array<std::uint64_t, 4> s_{};
};

/// Stream labels. Every random quantity is drawn from a stream keyed by
/// (seed, label, indices...), so results do not depend on the order in
/// which independent work items are executed.
enum class Stream : std::uint64_t {
  kSimulateInitial = 1,
  kSimulateSystem,
  kSimulateObservations,
  kSimulateGauges,
  kEnksInitial,
  kEnksForecast,
  kEnksPseudoObs,
  kEnksSelect,
  kExactDraw,
  kGibbsStatic,
  kGibbsLatent,
  kGibbsVelocity,
  kGibbsState,
  kForecast,
  kTest,
};

/// Random number source with the handful of distributions the sampler needs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, Stream stream, std::initializer_list<std::uint64_t> keys = {});

  double normal();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double exponential(double rate);
  /// Uniform integer on [0, count).
  std::uint64_t below(std::uint64_t count);

  Xoshiro256pp& engine() { return engine_; }

 private:
  Xoshiro256pp engine_;
};

/// Mix a seed and a list of keys into a 64-bit stream seed.
std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::initializer_list<std::uint64_t> keys);

}  // namespace stormfield
