#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "convtn/tensor.hpp"

namespace convtn {

/// One axis of an operand: a single index name, or a group of names that are
/// flattened row-major into that axis.
using Atom = std::vector<std::string>;
using Term = std::vector<Atom>;
using SizeMap = std::map<std::string, Index>;

/// Parsed contraction equation with every index size resolved.
///
/// Grammar (einops-style grouping):
///   equation := inputs "->" output
///   inputs   := term ("," term)*
///   term     := atom+           (atoms separated by whitespace)
///   atom     := index | "(" index (ws index)+ ")"
///   index    := [a-z][a-z0-9_]*
struct EinsumSpec {
  std::vector<Term> inputs;
  Term output;
  SizeMap sizes;

  std::string equation() const;
  /// Index names of one term with groups flattened.
  static std::vector<std::string> flatten(const Term& term);
  /// Per-index shape of a term (groups expanded).
  Shape ungrouped_shape(const Term& term) const;
  /// Axis shape of a term (group sizes multiplied).
  Shape grouped_shape(const Term& term) const;
};

/// Parses `equation` and infers index sizes from the operand shapes. `known`
/// provides sizes that cannot be read off an axis, e.g. the group count `g`
/// inside "(g c)".
EinsumSpec parse(std::string_view equation, std::span<const Shape> operand_shapes, const SizeMap& known = {});

struct ContractionStep {
  enum class Kind { Reduce, Pairwise };
  Kind kind = Kind::Pairwise;
  /// Operand ids: inputs are 0..n-1, step s produces id n + s.
  int left = -1;
  int right = -1;
  int result = -1;
  std::vector<std::string> indices;
  std::int64_t flops = 0;
  std::int64_t result_size = 0;
};

/// Contraction order with cost accounting. A Reduce step sums out indices
/// that occur in a single operand only, its cost is the operand size. A
/// Pairwise step costs the product of the sizes of all indices of its two
/// operands (multiply-adds).
struct ContractionPlan {
  std::vector<std::vector<std::string>> input_indices;
  std::vector<std::string> output_indices;
  SizeMap sizes;
  std::vector<ContractionStep> steps;
  std::int64_t flops = 0;
  std::int64_t max_intermediate = 0;
  bool exhaustive = false;
};

/// Operand count up to which plan() searches all binary trees.
inline constexpr std::size_t kExhaustivePlanLimit = 6;

ContractionPlan plan(const EinsumSpec& spec);

/// Plan with an explicit order: each pair addresses positions in the current
/// operand list (inputs after single-operand reductions, in input order); the
/// merged operand is appended at the end and both positions are removed.
ContractionPlan plan_sequence(const EinsumSpec& spec, std::span<const std::pair<std::size_t, std::size_t>> order);

Tensor contract(const EinsumSpec& spec, std::span<const Tensor> operands, const ContractionPlan& plan);

/// parse + plan + contract.
Tensor einsum(std::string_view equation, std::span<const Tensor> operands, const SizeMap& known = {});

struct StepCost {
  std::string description;
  std::int64_t flops = 0;
  std::int64_t result_size = 0;
};

struct CostReport {
  std::int64_t flops = 0;
  std::int64_t max_intermediate = 0;
  std::vector<StepCost> per_step;
};

CostReport cost_report(const ContractionPlan& plan);

}  // namespace convtn
