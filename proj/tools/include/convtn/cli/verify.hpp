#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "convtn/cli/config.hpp"
#include "convtn/conv_ops.hpp"

namespace convtn::cli {

/// Whether the oracle covers `op` on `spec` (Toeplitz needs G = 1, the
/// explicit GGN a small weight count).
bool has_oracle(Op op, const ConvSpec& spec);

/// Reference result of `op` computed by the loop-based oracle.
Tensor oracle_result(Op op, const ConvSpec& spec, std::span<const Tensor> inputs);

/// Flips the first entry of the first index pattern and unmarks it, so the
/// corruption survives simplification.
void corrupt_first_pattern(TensorNetwork& network);

struct CheckStats {
  std::string name;
  int passed = 0;
  int failed = 0;
  int skipped = 0;
  double worst_error = 0.0;
  std::string worst_layer;
};

struct VerifyOptions {
  bool simplify = true;
  std::optional<Op> only;
  std::uint64_t seed = 0;
  double tolerance = 1e-12;
  bool inject_fault = false;
};

struct VerifyReport {
  std::vector<CheckStats> checks;
  std::vector<std::string> failures;
  double seconds = 0.0;

  bool ok() const { return failures.empty(); }
};

/// Oracle equivalence of every operation plus adjointness, simplification
/// agreement and Kronecker-factor structure, for every layer.
VerifyReport verify(const std::vector<LayerConfig>& layers, const VerifyOptions& options);

void print_report(std::ostream& out, const VerifyReport& report);

}  // namespace convtn::cli
