#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "convtn/einsum.hpp"
#include "convtn/random.hpp"

namespace convtn::reference {

struct RandomEinsum {
  std::string equation;
  std::vector<Tensor> operands;
  EinsumSpec spec;
};

namespace detail {

inline std::string join_term(const Term& term) {
  std::string out;
  for (const auto& atom : term) {
    if (!out.empty()) out += ' ';
    if (atom.size() == 1) {
      out += atom[0];
    } else {
      out += '(';
      for (std::size_t i = 0; i < atom.size(); ++i) out += (i ? " " : "") + atom[i];
      out += ')';
    }
  }
  return out;
}

// Occasionally merges two adjacent axes of a term into a group.
inline Term maybe_group(std::vector<std::string> names, Rng& rng) {
  Term term;
  for (auto& n : names) term.push_back({n});
  if (term.size() >= 2 && rng.uniform() < 0.3) {
    const auto at = static_cast<std::size_t>(rng.integer(0, static_cast<Index>(term.size()) - 2));
    term[at].push_back(term[at + 1][0]);
    term.erase(term.begin() + static_cast<std::ptrdiff_t>(at) + 1);
  }
  return term;
}

}  // namespace detail

// Random equation with 1..max_operands inputs over a pool of small indices.
inline RandomEinsum random_einsum(Rng& rng, Index max_operands) {
  const Index pool = rng.integer(2, 6);
  std::vector<std::string> names;
  SizeMap sizes;
  for (Index i = 0; i < pool; ++i) {
    names.push_back(std::string(1, static_cast<char>('a' + i)));
    sizes[names.back()] = rng.integer(1, 4);
  }
  const Index count = rng.integer(1, max_operands);
  std::vector<Term> inputs;
  std::vector<std::string> used;
  for (Index t = 0; t < count; ++t) {
    std::vector<std::string> shuffled = names;
    for (std::size_t i = shuffled.size(); i > 1; --i)
      std::swap(shuffled[i - 1], shuffled[static_cast<std::size_t>(rng.integer(0, static_cast<Index>(i) - 1))]);
    shuffled.resize(static_cast<std::size_t>(rng.integer(1, std::min<Index>(3, pool))));
    for (const auto& n : shuffled)
      if (std::find(used.begin(), used.end(), n) == used.end()) used.push_back(n);
    inputs.push_back(detail::maybe_group(shuffled, rng));
  }
  std::vector<std::string> out;
  for (const auto& n : used)
    if (rng.uniform() < 0.4) out.push_back(n);
  Term output = detail::maybe_group(out, rng);

  RandomEinsum r;
  std::vector<Shape> shapes;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    r.equation += (t ? ", " : "") + detail::join_term(inputs[t]);
    Shape s;
    for (const auto& atom : inputs[t]) {
      Index n = 1;
      for (const auto& name : atom) n *= sizes[name];
      s.push_back(n);
    }
    r.operands.push_back(random_normal(s, rng));
    shapes.push_back(s);
  }
  r.equation += " -> " + detail::join_term(output);
  SizeMap known;
  for (const auto& n : used) known[n] = sizes[n];
  r.spec = parse(r.equation, shapes, known);
  return r;
}

// Smallest flop count over every pairwise merge order.
inline std::int64_t best_sequence_flops(const EinsumSpec& spec) {
  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  std::vector<std::pair<std::size_t, std::size_t>> order;
  auto recurse = [&](auto&& self, std::size_t live) -> void {
    if (live <= 1) {
      best = std::min(best, plan_sequence(spec, order).flops);
      return;
    }
    for (std::size_t a = 0; a < live; ++a)
      for (std::size_t b = a + 1; b < live; ++b) {
        order.emplace_back(a, b);
        self(self, live - 1);
        order.pop_back();
      }
  };
  recurse(recurse, spec.inputs.size());
  return best;
}

}  // namespace convtn::reference
