#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "convtn/conv_spec.hpp"
#include "convtn/einsum.hpp"

namespace convtn {

/// Marks an operand as an index pattern of one spatial dimension. Full
/// patterns carry the term (input, output, kernel); averaged patterns carry
/// (input, kernel).
struct PatternRole {
  DimSpec dim;
  bool averaged = false;
};

/// A contraction together with its operands and a scalar prefactor.
struct TensorNetwork {
  EinsumSpec spec;
  std::vector<Tensor> operands;
  std::vector<std::optional<PatternRole>> roles;
  double scale = 1.0;
};

TensorNetwork make_network(std::string_view equation, std::vector<Tensor> operands,
                           std::vector<std::optional<PatternRole>> roles = {}, const SizeMap& known = {},
                           double scale = 1.0);

ContractionPlan plan(const TensorNetwork& network);
Tensor evaluate(const TensorNetwork& network, const ContractionPlan& plan);
Tensor evaluate(const TensorNetwork& network);

}  // namespace convtn
