#include <gtest/gtest.h>

#include "convtn/einsum.hpp"
#include "convtn/random.hpp"
#include "support/naive_einsum.hpp"
#include "support/random_einsum.hpp"

using namespace convtn;

namespace {

std::vector<std::pair<std::size_t, std::size_t>> random_order(std::size_t n, Rng& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> order;
  for (std::size_t live = n; live > 1; --live) {
    const auto a = static_cast<std::size_t>(rng.integer(0, static_cast<Index>(live) - 2));
    const auto b = static_cast<std::size_t>(rng.integer(static_cast<Index>(a) + 1, static_cast<Index>(live) - 1));
    order.emplace_back(a, b);
  }
  return order;
}

}  // namespace

TEST(EinsumProperties, MatchesNaiveLoops) {
  Rng rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    const auto r = reference::random_einsum(rng, 5);
    const Tensor got = contract(r.spec, r.operands, plan(r.spec));
    const Tensor want = reference::naive_einsum(r.spec, r.operands);
    EXPECT_LE(max_abs(got - want), 1e-12 * std::max(1.0, max_abs(want))) << r.equation;
  }
}

TEST(EinsumProperties, OperandOrderDoesNotMatter) {
  Rng rng(102);
  for (int trial = 0; trial < 50; ++trial) {
    const auto r = reference::random_einsum(rng, 5);
    const std::size_t n = r.operands.size();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = n - 1 - i;
    std::string eq;
    std::vector<Tensor> ops;
    std::vector<Shape> shapes;
    for (std::size_t i = 0; i < n; ++i) {
      eq += (i ? ", " : "") + reference::detail::join_term(r.spec.inputs[perm[i]]);
      ops.push_back(r.operands[perm[i]]);
      shapes.push_back(ops.back().shape());
    }
    eq += " -> " + reference::detail::join_term(r.spec.output);
    const EinsumSpec permuted = parse(eq, shapes, r.spec.sizes);
    const Tensor a = contract(r.spec, r.operands, plan(r.spec));
    const Tensor b = contract(permuted, ops, plan(permuted));
    EXPECT_LE(max_abs(a - b), 1e-12 * std::max(1.0, max_abs(a))) << r.equation;
  }
}

TEST(EinsumProperties, ResultIndependentOfOrder) {
  Rng rng(103);
  for (int trial = 0; trial < 50; ++trial) {
    const auto r = reference::random_einsum(rng, 5);
    const Tensor best = contract(r.spec, r.operands, plan(r.spec));
    const auto order = random_order(r.operands.size(), rng);
    const Tensor other = contract(r.spec, r.operands, plan_sequence(r.spec, order));
    EXPECT_LE(max_abs(best - other), 1e-12 * std::max(1.0, max_abs(best))) << r.equation;
  }
}

TEST(EinsumProperties, ExhaustivePlanIsOptimal) {
  Rng rng(104);
  for (int trial = 0; trial < 50; ++trial) {
    const auto r = reference::random_einsum(rng, 5);
    const ContractionPlan p = plan(r.spec);
    EXPECT_TRUE(p.exhaustive);
    EXPECT_EQ(p.flops, reference::best_sequence_flops(r.spec)) << r.equation;
  }
}
