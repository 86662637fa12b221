#pragma once

#include <array>
#include <cstdint>

#include "convtn/tensor.hpp"

namespace convtn {

/// xoshiro256** stream whose state is expanded from a 64-bit seed with
/// splitmix64. Reproducible across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal (Marsaglia polar method).
  double normal();
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [lo, hi].
  Index integer(Index lo, Index hi);

 private:
  std::array<std::uint64_t, 4> state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

Tensor random_normal(Shape shape, Rng& rng);
Tensor random_uniform(Shape shape, Rng& rng, double lo = 0.0, double hi = 1.0);

}  // namespace convtn
