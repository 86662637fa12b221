#include "convtn/simplify.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "convtn/error.hpp"
#include "convtn/index_pattern.hpp"

namespace convtn {

const char* to_string(RewriteKind kind) noexcept {
  switch (kind) {
    case RewriteKind::DenseReshape:
      return "dense_reshape";
    case RewriteKind::DownsampleNarrow:
      return "downsample_narrow";
    case RewriteKind::KernelOutputSwap:
      return "kernel_output_swap";
  }
  return "unknown";
}

namespace {

using Names = std::vector<std::string>;

bool contains(const Names& term, const std::string& name) {
  return std::find(term.begin(), term.end(), name) != term.end();
}

Index axis_of(const Names& term, const std::string& name) {
  return std::find(term.begin(), term.end(), name) - term.begin();
}

bool output_contains(const Term& output, const std::string& name) {
  for (const auto& atom : output) {
    if (std::find(atom.begin(), atom.end(), name) != atom.end()) return true;
  }
  return false;
}

// Flat working copy of a network: every operand axis carries one index.
struct Flat {
  std::vector<Names> terms;
  std::vector<Tensor> operands;
  std::vector<std::optional<PatternRole>> roles;
  Term output;
  SizeMap sizes;
  double scale = 1.0;

  explicit Flat(const TensorNetwork& net) : roles(net.roles), output(net.spec.output), sizes(net.spec.sizes),
                                            scale(net.scale) {
    for (std::size_t t = 0; t < net.operands.size(); ++t) {
      terms.push_back(EinsumSpec::flatten(net.spec.inputs[t]));
      operands.push_back(net.operands[t].reshape(net.spec.ungrouped_shape(net.spec.inputs[t])));
    }
  }

  std::vector<std::size_t> users(std::size_t pattern_pos, const std::string& name) const {
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t < terms.size(); ++t) {
      if (t != pattern_pos && contains(terms[t], name)) out.push_back(t);
    }
    return out;
  }

  std::string fresh(const std::string& base) const {
    std::string name = base + "_o";
    auto taken = [&](const std::string& n) {
      if (sizes.count(n)) return true;
      for (const auto& term : terms) {
        if (contains(term, n)) return true;
      }
      return false;
    };
    while (taken(name)) name += "_";
    return name;
  }

  // Replaces axis `name` of operand t by the pair (a, b).
  void split_axis(std::size_t t, const std::string& name, const std::string& a, const std::string& b) {
    const Index axis = axis_of(terms[t], name);
    Shape shape = operands[t].shape();
    shape[axis] = sizes.at(b);
    shape.insert(shape.begin() + axis, sizes.at(a));
    operands[t] = operands[t].reshape(shape);
    terms[t][axis] = b;
    terms[t].insert(terms[t].begin() + axis, a);
    roles[t].reset();
  }

  void erase(std::size_t t) {
    terms.erase(terms.begin() + static_cast<std::ptrdiff_t>(t));
    operands.erase(operands.begin() + static_cast<std::ptrdiff_t>(t));
    roles.erase(roles.begin() + static_cast<std::ptrdiff_t>(t));
  }

  TensorNetwork build() const {
    TensorNetwork net;
    std::set<std::string> used;
    for (const auto& term : terms) {
      Term grouped;
      for (const auto& n : term) {
        grouped.push_back({n});
        used.insert(n);
      }
      net.spec.inputs.push_back(std::move(grouped));
    }
    net.spec.output = output;
    for (const auto& n : used) net.spec.sizes[n] = sizes.at(n);
    net.operands = operands;
    net.roles = roles;
    net.scale = scale;
    return net;
  }
};

struct PatternLegs {
  std::string input, output, kernel;
  bool fresh_output = false;
};

PatternLegs legs_of(const Flat& flat, std::size_t p) {
  const auto& term = flat.terms[p];
  if (flat.roles[p]->averaged) return {term[0], flat.fresh(term[0]), term[1], true};
  return {term[0], term[1], term[2], false};
}

// The dense rewrite needs the input index on some other operand, or in the
// output with both pattern legs carried by other operands. It must not create
// a repeated index.
bool dense_applicable(const Flat& flat, std::size_t p, const PatternLegs& legs) {
  const auto users = flat.users(p, legs.input);
  if (users.empty()) {
    if (legs.fresh_output || !output_contains(flat.output, legs.input)) return false;
    if (flat.users(p, legs.output).empty() || flat.users(p, legs.kernel).empty()) return false;
  }
  for (std::size_t t : users) {
    if (contains(flat.terms[t], legs.output) || contains(flat.terms[t], legs.kernel)) return false;
  }
  if (output_contains(flat.output, legs.input)) {
    if (legs.fresh_output) return false;
    if (output_contains(flat.output, legs.output) || output_contains(flat.output, legs.kernel)) return false;
  }
  return true;
}

std::string describe(const char* what, const DimSpec& dim, const std::string& detail) {
  std::ostringstream os;
  os << what << " pattern " << to_string(dim) << ": " << detail;
  return os.str();
}

RewriteStep apply_dense(Flat& flat, std::size_t p, const PatternLegs& legs) {
  const PatternRole role = *flat.roles[p];
  const Index O = output_size(role.dim);
  flat.sizes[legs.output] = O;
  for (std::size_t t : flat.users(p, legs.input)) flat.split_axis(t, legs.input, legs.output, legs.kernel);
  for (auto& atom : flat.output) {
    auto it = std::find(atom.begin(), atom.end(), legs.input);
    if (it == atom.end()) continue;
    *it = legs.kernel;
    atom.insert(it, legs.output);
  }
  if (role.averaged) flat.scale /= static_cast<double>(O);
  flat.erase(p);
  flat.sizes.erase(legs.input);
  return {RewriteKind::DenseReshape, p, {legs.input, legs.output, legs.kernel},
          describe(role.averaged ? "averaged dense" : "dense", role.dim,
                   legs.input + " -> (" + legs.output + " " + legs.kernel + ")")};
}

RewriteStep apply_downsample(Flat& flat, std::size_t p, const PatternLegs& legs) {
  PatternRole& role = *flat.roles[p];
  const DimSpec old = role.dim;
  const Index S = old.stride, K = old.kernel_size, blocks = old.input_size / S;
  const DimSpec narrowed{K * blocks, K, K, 0, 1};
  for (std::size_t t : flat.users(p, legs.input)) {
    const Index axis = axis_of(flat.terms[t], legs.input);
    Shape split = flat.operands[t].shape();
    split[axis] = S;
    split.insert(split.begin() + axis, blocks);
    Shape merged = flat.operands[t].shape();
    merged[axis] = K * blocks;
    flat.operands[t] = flat.operands[t].reshape(split).narrow(axis + 1, 0, K).reshape(merged);
    flat.roles[t].reset();
  }
  flat.operands[p] = role.averaged ? averaged_pattern(narrowed) : pattern(narrowed)->table;
  role.dim = narrowed;
  flat.sizes[legs.input] = K * blocks;
  std::ostringstream detail;
  detail << legs.input << " narrowed to the first " << K << " of every " << S << " entries";
  return {RewriteKind::DownsampleNarrow, p, {legs.input}, describe("down-sampling", old, detail.str())};
}

}  // namespace

SimplifyResult simplify(const TensorNetwork& network) {
  Flat flat(network);
  std::vector<RewriteStep> steps;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t p = 0; p < flat.terms.size() && !changed; ++p) {
      if (!flat.roles[p]) continue;
      const PatternKind kind = classify(flat.roles[p]->dim);
      if (kind == PatternKind::General) continue;
      const PatternLegs legs = legs_of(flat, p);
      if (!dense_applicable(flat, p, legs)) continue;
      if (kind == PatternKind::DownSampling) {
        if (output_contains(flat.output, legs.input)) continue;
        steps.push_back(apply_downsample(flat, p, legs));
      }
      steps.push_back(apply_dense(flat, p, legs_of(flat, p)));
      changed = true;
    }
  }
  if (steps.empty()) return {network, {}};
  return {flat.build(), std::move(steps)};
}

SimplifyResult swap_weight_vjp_to_conv(const TensorNetwork& network) {
  SimplifyResult result{network, {}};
  TensorNetwork& net = result.network;
  for (std::size_t p = 0; p < net.operands.size(); ++p) {
    if (!net.roles[p] || net.roles[p]->averaged) continue;
    const DimSpec dim = net.roles[p]->dim;
    const IndexPattern swapped = kernel_output_swap(*pattern(dim));
    const Names legs = EinsumSpec::flatten(net.spec.inputs[p]);
    net.spec.inputs[p] = {{legs[0]}, {legs[2]}, {legs[1]}};
    net.operands[p] = swapped.table;
    net.roles[p]->dim = swapped.dim;
    result.steps.push_back({RewriteKind::KernelOutputSwap, p, legs,
                            describe("swapped", dim, "now " + to_string(swapped.dim) + " over (" + legs[0] + " " +
                                                         legs[2] + " " + legs[1] + ")")});
  }
  return result;
}

}  // namespace convtn
