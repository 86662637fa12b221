#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "convtn/conv_spec.hpp"
#include "convtn/tensor.hpp"

namespace convtn {

/// Keep probabilities of the sampled axes of X in a weight VJP. Recognized
/// axes are "c_in", "i1" and "i2"; axes not listed are kept entirely.
struct CrsConfig {
  std::map<std::string, double> keep_probs;
  std::uint64_t seed = 0;

  /// Channel sampling (p, 1, 1).
  static CrsConfig channels(double p, std::uint64_t seed);
  /// Spatial sampling with probability p on every spatial axis of `spec`.
  static CrsConfig spatial(const ConvSpec& spec, double p, std::uint64_t seed);
};

/// Kept flags per axis; an empty vector means the axis is not sampled.
struct CrsMasks {
  std::vector<bool> channels;
  std::vector<std::vector<bool>> spatial;
};

struct CrsResult {
  Tensor estimate;
  std::map<std::string, double> kept_fraction;
};

/// Draws masks in the order c_in, i1, i2 from a stream seeded with cfg.seed.
CrsMasks draw_masks(const ConvSpec& spec, const CrsConfig& cfg);

/// Unbiased estimate of the weight VJP that sums only over kept entries and
/// rescales by 1/p per sampled axis.
Tensor crs_weight_vjp_masked(const ConvSpec& spec, const Tensor& x, const Tensor& v_y, const CrsMasks& masks,
                             const CrsConfig& cfg);

CrsResult crs_weight_vjp(const ConvSpec& spec, const Tensor& x, const Tensor& v_y, const CrsConfig& cfg);

/// ||exact - estimate|| / ||exact||; throws DivisionByZero when exact is zero.
double normalized_error(const Tensor& exact, const Tensor& estimate);

}  // namespace convtn
