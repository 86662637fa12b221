#pragma once

#include <string>
#include <vector>

#include "convtn/network.hpp"

namespace convtn {

enum class RewriteKind { DenseReshape, DownsampleNarrow, KernelOutputSwap };

const char* to_string(RewriteKind kind) noexcept;

struct RewriteStep {
  RewriteKind kind;
  /// Position of the rewritten pattern operand at the time of the rewrite.
  std::size_t operand = 0;
  std::vector<std::string> indices;
  std::string description;
};

struct SimplifyResult {
  TensorNetwork network;
  std::vector<RewriteStep> steps;
};

/// Removes dense and down-sampling index patterns by reshaping (and for
/// down-sampling, narrowing) the tensors that share their input index.
/// General patterns are left in place. Repeated application is a no-op.
SimplifyResult simplify(const TensorNetwork& network);

/// Replaces every full pattern operand by its kernel-output swapped pattern.
/// Throws BoundaryPixels when a dimension has unread input pixels.
SimplifyResult swap_weight_vjp_to_conv(const TensorNetwork& network);

}  // namespace convtn
