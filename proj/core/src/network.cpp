#include "convtn/network.hpp"

#include "convtn/error.hpp"

namespace convtn {

TensorNetwork make_network(std::string_view equation, std::vector<Tensor> operands,
                           std::vector<std::optional<PatternRole>> roles, const SizeMap& known, double scale) {
  std::vector<Shape> shapes;
  for (const auto& t : operands) shapes.push_back(t.shape());
  TensorNetwork net;
  net.spec = parse(equation, shapes, known);
  net.operands = std::move(operands);
  net.roles = std::move(roles);
  net.roles.resize(net.operands.size());
  net.scale = scale;
  for (std::size_t t = 0; t < net.roles.size(); ++t) {
    if (!net.roles[t]) continue;
    const std::size_t expected = net.roles[t]->averaged ? 2 : 3;
    if (EinsumSpec::flatten(net.spec.inputs[t]).size() != expected) {
      throw Error(ErrorCode::ShapeMismatch, "pattern operand " + std::to_string(t) + " has the wrong rank");
    }
  }
  return net;
}

ContractionPlan plan(const TensorNetwork& network) { return plan(network.spec); }

Tensor evaluate(const TensorNetwork& network, const ContractionPlan& plan) {
  Tensor out = contract(network.spec, network.operands, plan);
  if (network.scale != 1.0) out *= network.scale;
  return out;
}

Tensor evaluate(const TensorNetwork& network) { return evaluate(network, plan(network)); }

}  // namespace convtn
