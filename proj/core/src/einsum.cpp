#include "convtn/einsum.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <limits>
#include <optional>
#include <set>
#include <sstream>

#include "convtn/error.hpp"

namespace convtn {

namespace {

// ---------------------------------------------------------------------------
// Parsing

bool is_index_start(char c) { return c >= 'a' && c <= 'z'; }
bool is_index_char(char c) { return is_index_start(c) || (c >= '0' && c <= '9') || c == '_'; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

[[noreturn]] void parse_error(std::string_view equation, const std::string& why) {
  throw Error(ErrorCode::ParseError, why + " in \"" + std::string(equation) + "\"");
}

// Classic single-letter notation ("ij,jk->ik") is accepted when the equation
// has no whitespace or parentheses and only letters in its terms.
bool is_letter_notation(std::string_view equation) {
  for (char c : equation) {
    if (!(is_index_start(c) || c == ',' || c == '-' || c == '>')) return false;
  }
  return true;
}

Term parse_letter_term(std::string_view text) {
  Term term;
  for (char c : text) term.push_back({std::string(1, c)});
  return term;
}

Term parse_term(std::string_view equation, std::string_view text, bool allow_empty) {
  Term term;
  std::size_t pos = 0;
  auto read_index = [&]() {
    const std::size_t begin = pos;
    if (pos >= text.size() || !is_index_start(text[pos])) parse_error(equation, "expected an index name");
    while (pos < text.size() && is_index_char(text[pos])) ++pos;
    return std::string(text.substr(begin, pos - begin));
  };
  auto require_separator = [&]() {
    if (pos < text.size() && !is_space(text[pos])) parse_error(equation, "atoms must be separated by whitespace");
  };
  while (true) {
    while (pos < text.size() && is_space(text[pos])) ++pos;
    if (pos >= text.size()) break;
    if (text[pos] == '(') {
      ++pos;
      Atom group;
      while (true) {
        while (pos < text.size() && is_space(text[pos])) ++pos;
        if (pos < text.size() && text[pos] == ')') {
          ++pos;
          break;
        }
        if (!group.empty() && !is_space(text[pos - 1])) parse_error(equation, "group members must be separated by whitespace");
        group.push_back(read_index());
      }
      if (group.size() < 2) parse_error(equation, "a group needs at least two indices");
      term.push_back(std::move(group));
    } else {
      term.push_back({read_index()});
    }
    require_separator();
  }
  if (term.empty() && !allow_empty) parse_error(equation, "empty input term");
  return term;
}

void check_unique(std::string_view equation, const Term& term) {
  std::set<std::string> seen;
  for (const auto& name : EinsumSpec::flatten(term)) {
    if (!seen.insert(name).second) parse_error(equation, "index '" + name + "' repeats within one term");
  }
}

void infer_sizes(std::string_view equation, const std::vector<Term>& inputs, std::span<const Shape> shapes,
                 SizeMap& sizes) {
  auto set_size = [&](const std::string& name, Index value) {
    auto [it, inserted] = sizes.emplace(name, value);
    if (!inserted && it->second != value) {
      throw Error(ErrorCode::SizeConflict, "index '" + name + "' has sizes " + std::to_string(it->second) +
                                               " and " + std::to_string(value) + " in \"" +
                                               std::string(equation) + "\"");
    }
  };
  bool progress = true;
  std::vector<const Atom*> pending;
  while (progress) {
    progress = false;
    pending.clear();
    for (std::size_t t = 0; t < inputs.size(); ++t) {
      for (std::size_t a = 0; a < inputs[t].size(); ++a) {
        const Atom& atom = inputs[t][a];
        const Index axis = shapes[t][a];
        Index known_product = 1;
        std::vector<const std::string*> unknown;
        for (const auto& name : atom) {
          auto it = sizes.find(name);
          if (it == sizes.end()) {
            unknown.push_back(&name);
          } else {
            known_product *= it->second;
          }
        }
        if (unknown.empty()) {
          if (known_product != axis) {
            throw Error(ErrorCode::SizeConflict, "axis of length " + std::to_string(axis) + " does not match " +
                                                     "its indices (product " + std::to_string(known_product) +
                                                     ") in \"" + std::string(equation) + "\"");
          }
        } else if (unknown.size() == 1) {
          if (axis % known_product != 0) {
            throw Error(ErrorCode::SizeConflict, "axis of length " + std::to_string(axis) +
                                                     " is not divisible by " + std::to_string(known_product) +
                                                     " in \"" + std::string(equation) + "\"");
          }
          set_size(*unknown.front(), axis / known_product);
          progress = true;
        } else {
          pending.push_back(&atom);
        }
      }
    }
  }
  if (!pending.empty()) {
    throw Error(ErrorCode::UnderdeterminedGroup,
                "group has two or more indices of unknown size in \"" + std::string(equation) + "\"");
  }
}

// ---------------------------------------------------------------------------
// Planning

using Mask = std::uint64_t;

std::int64_t saturating_mul(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_mul_overflow(a, b, &r)) return std::numeric_limits<std::int64_t>::max();
  return r;
}

std::int64_t saturating_add(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_add_overflow(a, b, &r)) return std::numeric_limits<std::int64_t>::max();
  return r;
}

struct IndexTable {
  std::vector<std::string> names;
  std::vector<Index> sizes;
  std::map<std::string, int> position;

  int id(const std::string& name) {
    auto it = position.find(name);
    if (it != position.end()) return it->second;
    if (names.size() == 64) throw Error(ErrorCode::Unsupported, "more than 64 distinct indices");
    position[name] = static_cast<int>(names.size());
    names.push_back(name);
    return static_cast<int>(names.size()) - 1;
  }

  Mask mask(const std::vector<std::string>& list) {
    Mask m = 0;
    for (const auto& n : list) m |= Mask{1} << id(n);
    return m;
  }

  std::int64_t volume(Mask m) const {
    std::int64_t v = 1;
    for (; m; m &= m - 1) v = saturating_mul(v, sizes[std::countr_zero(m)]);
    return v;
  }
};

struct Operand {
  int id;
  Mask mask;
  std::vector<std::string> indices;
};

// Orders the indices of `keep` by their first appearance in a then b.
std::vector<std::string> ordered(Mask keep, const std::vector<std::string>& a, const std::vector<std::string>& b,
                                 IndexTable& table) {
  std::vector<std::string> out;
  for (const auto* list : {&a, &b}) {
    for (const auto& n : *list) {
      const Mask bit = Mask{1} << table.id(n);
      if ((keep & bit) && std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
    }
  }
  return out;
}

class Planner {
 public:
  explicit Planner(const EinsumSpec& spec) {
    for (const auto& term : spec.inputs) plan_.input_indices.push_back(EinsumSpec::flatten(term));
    plan_.output_indices = EinsumSpec::flatten(spec.output);
    plan_.sizes = spec.sizes;
    for (const auto& list : plan_.input_indices) table_.mask(list);
    table_.mask(plan_.output_indices);
    for (const auto& name : table_.names) table_.sizes.push_back(spec.sizes.at(name));
    output_mask_ = table_.mask(plan_.output_indices);
    next_id_ = static_cast<int>(plan_.input_indices.size());
    reduce_single_operand_indices();
  }

  const std::vector<Operand>& current() const { return current_; }

  Mask others(std::size_t skip_a, std::size_t skip_b) const {
    Mask m = output_mask_;
    for (std::size_t k = 0; k < current_.size(); ++k) {
      if (k != skip_a && k != skip_b) m |= current_[k].mask;
    }
    return m;
  }

  std::int64_t pair_cost(std::size_t a, std::size_t b) const {
    return table_.volume(current_[a].mask | current_[b].mask);
  }

  std::int64_t pair_result_size(std::size_t a, std::size_t b) const {
    return table_.volume((current_[a].mask | current_[b].mask) & others(a, b));
  }

  // Merges positions a and b of the current list; the result goes to the end.
  void merge(std::size_t a, std::size_t b) {
    if (a == b || a >= current_.size() || b >= current_.size()) {
      throw Error(ErrorCode::OutOfBounds, "invalid contraction order");
    }
    const Mask keep = (current_[a].mask | current_[b].mask) & others(a, b);
    const Operand& x = current_[a].id <= current_[b].id ? current_[a] : current_[b];
    const Operand& y = current_[a].id <= current_[b].id ? current_[b] : current_[a];
    ContractionStep step;
    step.kind = ContractionStep::Kind::Pairwise;
    step.left = x.id;
    step.right = y.id;
    step.result = next_id_++;
    step.indices = ordered(keep, x.indices, y.indices, table_);
    step.flops = table_.volume(x.mask | y.mask);
    step.result_size = table_.volume(keep);
    Operand merged{step.result, keep, step.indices};
    plan_.steps.push_back(std::move(step));
    const std::size_t hi = std::max(a, b), lo = std::min(a, b);
    current_.erase(current_.begin() + static_cast<std::ptrdiff_t>(hi));
    current_.erase(current_.begin() + static_cast<std::ptrdiff_t>(lo));
    current_.push_back(std::move(merged));
  }

  void plan_exhaustive();
  void plan_greedy();

  ContractionPlan finish(bool exhaustive) {
    plan_.exhaustive = exhaustive;
    plan_.flops = 0;
    plan_.max_intermediate = 0;
    for (const auto& s : plan_.steps) {
      plan_.flops = saturating_add(plan_.flops, s.flops);
      plan_.max_intermediate = std::max(plan_.max_intermediate, s.result_size);
    }
    if (plan_.steps.empty()) plan_.max_intermediate = table_.volume(output_mask_);
    return std::move(plan_);
  }

 private:
  void reduce_single_operand_indices() {
    const std::size_t n = plan_.input_indices.size();
    std::vector<Mask> masks;
    for (const auto& list : plan_.input_indices) masks.push_back(table_.mask(list));
    for (std::size_t t = 0; t < n; ++t) {
      Mask elsewhere = output_mask_;
      for (std::size_t u = 0; u < n; ++u) {
        if (u != t) elsewhere |= masks[u];
      }
      const Mask keep = masks[t] & elsewhere;
      if (keep != masks[t]) {
        ContractionStep step;
        step.kind = ContractionStep::Kind::Reduce;
        step.left = static_cast<int>(t);
        step.result = next_id_++;
        step.indices = ordered(keep, plan_.input_indices[t], {}, table_);
        step.flops = table_.volume(masks[t]);
        step.result_size = table_.volume(keep);
        current_.push_back({step.result, keep, step.indices});
        plan_.steps.push_back(std::move(step));
      } else {
        current_.push_back({static_cast<int>(t), masks[t], plan_.input_indices[t]});
      }
    }
  }

  ContractionPlan plan_;
  IndexTable table_;
  Mask output_mask_ = 0;
  int next_id_ = 0;
  std::vector<Operand> current_;
};

void Planner::plan_exhaustive() {
  const std::size_t m = current_.size();
  if (m < 2) return;
  const unsigned full = (1u << m) - 1;
  struct Best {
    std::int64_t flops = std::numeric_limits<std::int64_t>::max();
    std::int64_t max_size = 0;
    unsigned left = 0;
    Mask indices = 0;
  };
  std::vector<Best> best(full + 1);
  auto union_of = [&](unsigned subset) {
    Mask u = 0;
    for (std::size_t k = 0; k < m; ++k) {
      if (subset & (1u << k)) u |= current_[k].mask;
    }
    return u;
  };
  for (unsigned s = 1; s <= full; ++s) {
    best[s].indices = union_of(s) & (output_mask_ | union_of(full & ~s));
    if (std::popcount(s) == 1) {
      best[s].flops = 0;
      continue;
    }
    const unsigned lowest = s & (~s + 1);
    const std::int64_t size = table_.volume(best[s].indices);
    // Proper subsets containing the lowest member, visited in increasing order.
    for (unsigned a = (s - 1) & s; a; a = (a - 1) & s) {
      if (!(a & lowest)) continue;
      const unsigned b = s & ~a;
      const std::int64_t f = saturating_add(saturating_add(best[a].flops, best[b].flops),
                                            table_.volume(best[a].indices | best[b].indices));
      const std::int64_t mx = std::max({best[a].max_size, best[b].max_size, size});
      if (f < best[s].flops || (f == best[s].flops && mx < best[s].max_size)) {
        best[s].flops = f;
        best[s].max_size = mx;
        best[s].left = a;
      }
    }
  }
  // Replay the optimal tree through merge(), which keeps positions in sync.
  std::vector<unsigned> members(m);
  for (std::size_t k = 0; k < m; ++k) members[k] = 1u << k;
  auto position_of = [&](unsigned subset) {
    return static_cast<std::size_t>(std::find(members.begin(), members.end(), subset) - members.begin());
  };
  auto emit = [&](auto&& self, unsigned s) -> void {
    if (std::popcount(s) == 1) return;
    const unsigned a = best[s].left, b = s & ~a;
    self(self, a);
    self(self, b);
    const std::size_t pa = position_of(a), pb = position_of(b);
    merge(pa, pb);
    const std::size_t hi = std::max(pa, pb), lo = std::min(pa, pb);
    members.erase(members.begin() + static_cast<std::ptrdiff_t>(hi));
    members.erase(members.begin() + static_cast<std::ptrdiff_t>(lo));
    members.push_back(s);
  };
  emit(emit, full);
}

void Planner::plan_greedy() {
  while (current_.size() > 1) {
    bool any_connected = false;
    for (std::size_t a = 0; a < current_.size() && !any_connected; ++a) {
      for (std::size_t b = a + 1; b < current_.size(); ++b) {
        if (current_[a].mask & current_[b].mask) {
          any_connected = true;
          break;
        }
      }
    }
    std::optional<std::tuple<std::int64_t, std::int64_t, int, int, std::size_t, std::size_t>> choice;
    for (std::size_t a = 0; a < current_.size(); ++a) {
      for (std::size_t b = a + 1; b < current_.size(); ++b) {
        if (any_connected && !(current_[a].mask & current_[b].mask)) continue;
        const int lo = std::min(current_[a].id, current_[b].id), hi = std::max(current_[a].id, current_[b].id);
        auto key = std::make_tuple(pair_cost(a, b), pair_result_size(a, b), lo, hi, a, b);
        if (!choice || key < *choice) choice = key;
      }
    }
    merge(std::get<4>(*choice), std::get<5>(*choice));
  }
}

// ---------------------------------------------------------------------------
// Execution

struct Labeled {
  Tensor tensor;
  std::vector<std::string> indices;
};

std::ptrdiff_t find_in(const std::vector<std::string>& list, const std::string& name) {
  auto it = std::find(list.begin(), list.end(), name);
  return it == list.end() ? -1 : it - list.begin();
}

Labeled sum_except(const Labeled& x, const std::vector<std::string>& keep) {
  std::vector<Index> axes;
  std::vector<std::string> rest;
  for (std::size_t k = 0; k < x.indices.size(); ++k) {
    if (find_in(keep, x.indices[k]) < 0) {
      axes.push_back(static_cast<Index>(k));
    } else {
      rest.push_back(x.indices[k]);
    }
  }
  if (axes.empty()) return x;
  return {x.tensor.sum(axes), rest};
}

Labeled to_order(const Labeled& x, const std::vector<std::string>& order) {
  std::vector<Index> perm;
  for (const auto& n : order) perm.push_back(find_in(x.indices, n));
  return {x.tensor.permute(perm), order};
}

Labeled pairwise(Labeled a, Labeled b, const std::vector<std::string>& result, const SizeMap& sizes) {
  auto needed_by = [&](const Labeled& other) {
    std::vector<std::string> keep = result;
    keep.insert(keep.end(), other.indices.begin(), other.indices.end());
    return keep;
  };
  a = sum_except(a, needed_by(b));
  b = sum_except(b, needed_by(a));

  std::vector<std::string> batch, contracted, left_free, right_free;
  for (const auto& n : a.indices) {
    const bool in_b = find_in(b.indices, n) >= 0;
    const bool kept = find_in(result, n) >= 0;
    if (in_b && kept) {
      batch.push_back(n);
    } else if (in_b) {
      contracted.push_back(n);
    } else {
      left_free.push_back(n);
    }
  }
  for (const auto& n : b.indices) {
    if (find_in(a.indices, n) < 0) right_free.push_back(n);
  }
  auto volume = [&](const std::vector<std::string>& list) {
    Index v = 1;
    for (const auto& n : list) v *= sizes.at(n);
    return v;
  };
  auto concat = [](std::initializer_list<const std::vector<std::string>*> parts) {
    std::vector<std::string> out;
    for (const auto* p : parts) out.insert(out.end(), p->begin(), p->end());
    return out;
  };
  const Index nb = volume(batch), m = volume(left_free), k = volume(contracted), n = volume(right_free);
  Tensor lhs = to_order(a, concat({&batch, &left_free, &contracted})).tensor.reshape({nb, m, k});
  Tensor rhs = to_order(b, concat({&batch, &contracted, &right_free})).tensor.reshape({nb, k, n});
  Labeled product;
  product.indices = concat({&batch, &left_free, &right_free});
  Shape shape;
  for (const auto& name : product.indices) shape.push_back(sizes.at(name));
  product.tensor = batched_matmul(lhs, rhs).reshape(shape);
  return to_order(product, result);
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<std::string> EinsumSpec::flatten(const Term& term) {
  std::vector<std::string> out;
  for (const auto& atom : term) out.insert(out.end(), atom.begin(), atom.end());
  return out;
}

Shape EinsumSpec::ungrouped_shape(const Term& term) const {
  Shape s;
  for (const auto& name : flatten(term)) s.push_back(sizes.at(name));
  return s;
}

Shape EinsumSpec::grouped_shape(const Term& term) const {
  Shape s;
  for (const auto& atom : term) {
    Index v = 1;
    for (const auto& name : atom) v *= sizes.at(name);
    s.push_back(v);
  }
  return s;
}

std::string EinsumSpec::equation() const {
  auto write_term = [](std::ostringstream& os, const Term& term) {
    for (std::size_t a = 0; a < term.size(); ++a) {
      if (a) os << ' ';
      if (term[a].size() == 1) {
        os << term[a][0];
      } else {
        os << '(';
        for (std::size_t k = 0; k < term[a].size(); ++k) os << (k ? " " : "") << term[a][k];
        os << ')';
      }
    }
  };
  std::ostringstream os;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    if (t) os << ", ";
    write_term(os, inputs[t]);
  }
  os << " -> ";
  write_term(os, output);
  return os.str();
}

EinsumSpec parse(std::string_view equation, std::span<const Shape> operand_shapes, const SizeMap& known) {
  const std::size_t arrow = equation.find("->");
  if (arrow == std::string_view::npos) parse_error(equation, "missing \"->\"");
  if (equation.find("->", arrow + 2) != std::string_view::npos) parse_error(equation, "more than one \"->\"");
  const std::string_view lhs = equation.substr(0, arrow);
  const std::string_view rhs = trim(equation.substr(arrow + 2));
  const bool letters = is_letter_notation(equation);

  EinsumSpec spec;
  std::size_t begin = 0;
  while (true) {
    const std::size_t comma = lhs.find(',', begin);
    const std::string_view text = trim(lhs.substr(begin, comma == std::string_view::npos ? lhs.npos : comma - begin));
    if (letters && text.empty()) parse_error(equation, "empty input term");
    spec.inputs.push_back(letters ? parse_letter_term(text) : parse_term(equation, text, false));
    if (comma == std::string_view::npos) break;
    begin = comma + 1;
  }
  if (rhs.find(',') != std::string_view::npos) parse_error(equation, "output must be a single term");
  spec.output = letters ? parse_letter_term(rhs) : parse_term(equation, rhs, true);

  for (const auto& term : spec.inputs) check_unique(equation, term);
  check_unique(equation, spec.output);

  if (operand_shapes.size() != spec.inputs.size()) {
    throw Error(ErrorCode::ShapeMismatch, std::to_string(spec.inputs.size()) + " terms but " +
                                              std::to_string(operand_shapes.size()) + " operands in \"" +
                                              std::string(equation) + "\"");
  }
  std::set<std::string> input_names;
  for (std::size_t t = 0; t < spec.inputs.size(); ++t) {
    if (operand_shapes[t].size() != spec.inputs[t].size()) {
      throw Error(ErrorCode::ShapeMismatch, "operand " + std::to_string(t) + " has rank " +
                                                std::to_string(operand_shapes[t].size()) + " but its term has " +
                                                std::to_string(spec.inputs[t].size()) + " axes in \"" +
                                                std::string(equation) + "\"");
    }
    for (const auto& name : EinsumSpec::flatten(spec.inputs[t])) input_names.insert(name);
  }
  for (const auto& name : EinsumSpec::flatten(spec.output)) {
    if (!input_names.count(name)) parse_error(equation, "output index '" + name + "' appears in no input");
  }
  for (const auto& [name, size] : known) {
    if (input_names.count(name)) spec.sizes[name] = size;
  }
  infer_sizes(equation, spec.inputs, operand_shapes, spec.sizes);
  return spec;
}

ContractionPlan plan(const EinsumSpec& spec) {
  Planner planner(spec);
  const bool exhaustive = spec.inputs.size() <= kExhaustivePlanLimit;
  if (exhaustive) {
    planner.plan_exhaustive();
  } else {
    planner.plan_greedy();
  }
  return planner.finish(exhaustive);
}

ContractionPlan plan_sequence(const EinsumSpec& spec, std::span<const std::pair<std::size_t, std::size_t>> order) {
  Planner planner(spec);
  for (const auto& [a, b] : order) planner.merge(a, b);
  if (planner.current().size() != 1) {
    throw Error(ErrorCode::OutOfBounds, "contraction order leaves " + std::to_string(planner.current().size()) +
                                            " operands");
  }
  return planner.finish(false);
}

Tensor contract(const EinsumSpec& spec, std::span<const Tensor> operands, const ContractionPlan& plan) {
  if (operands.size() != spec.inputs.size()) {
    throw Error(ErrorCode::ShapeMismatch, std::to_string(operands.size()) + " operands for " +
                                              std::to_string(spec.inputs.size()) + " terms");
  }
  std::vector<Labeled> slots;
  for (std::size_t t = 0; t < operands.size(); ++t) {
    if (operands[t].shape() != spec.grouped_shape(spec.inputs[t])) {
      throw Error(ErrorCode::ShapeMismatch, "operand " + std::to_string(t) + " has shape " +
                                                to_string(operands[t].shape()) + ", expected " +
                                                to_string(spec.grouped_shape(spec.inputs[t])) + " for \"" +
                                                spec.equation() + "\"");
    }
    slots.push_back({operands[t].reshape(spec.ungrouped_shape(spec.inputs[t])), EinsumSpec::flatten(spec.inputs[t])});
  }
  for (const auto& step : plan.steps) {
    if (step.kind == ContractionStep::Kind::Reduce) {
      slots.push_back(to_order(sum_except(slots.at(step.left), step.indices), step.indices));
    } else {
      slots.push_back(pairwise(slots.at(step.left), slots.at(step.right), step.indices, spec.sizes));
    }
  }
  Labeled last = plan.steps.empty() ? slots.front() : slots.back();
  const auto output_indices = EinsumSpec::flatten(spec.output);
  last = to_order(sum_except(last, output_indices), output_indices);
  return last.tensor.reshape(spec.grouped_shape(spec.output));
}

Tensor einsum(std::string_view equation, std::span<const Tensor> operands, const SizeMap& known) {
  std::vector<Shape> shapes;
  for (const auto& t : operands) shapes.push_back(t.shape());
  const EinsumSpec spec = parse(equation, shapes, known);
  return contract(spec, operands, plan(spec));
}

CostReport cost_report(const ContractionPlan& plan) {
  CostReport report;
  report.flops = plan.flops;
  report.max_intermediate = plan.max_intermediate;
  const int n = static_cast<int>(plan.input_indices.size());
  auto name = [n](int id) { return id < n ? "op" + std::to_string(id) : "t" + std::to_string(id - n); };
  for (std::size_t s = 0; s < plan.steps.size(); ++s) {
    const auto& step = plan.steps[s];
    std::ostringstream os;
    if (step.kind == ContractionStep::Kind::Reduce) {
      os << "reduce " << name(step.left);
    } else {
      os << "contract " << name(step.left) << " " << name(step.right);
    }
    os << " -> " << name(step.result) << " [";
    for (std::size_t k = 0; k < step.indices.size(); ++k) os << (k ? " " : "") << step.indices[k];
    os << "]";
    report.per_step.push_back({os.str(), step.flops, step.result_size});
  }
  return report;
}

}  // namespace convtn
