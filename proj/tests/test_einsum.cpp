#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "convtn/einsum.hpp"
#include "convtn/error.hpp"
#include "convtn/random.hpp"
#include "support/naive_einsum.hpp"

using namespace convtn;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::ConfigError;
}

EinsumSpec parse_shapes(std::string_view eq, std::vector<Shape> shapes, const SizeMap& known = {}) {
  return parse(eq, shapes, known);
}

}  // namespace

TEST(EinsumParse, LetterNotation) {
  auto spec = parse_shapes("ij,jk->ik", {{2, 3}, {3, 4}});
  EXPECT_EQ(spec.sizes, (SizeMap{{"i", 2}, {"j", 3}, {"k", 4}}));
  ASSERT_EQ(spec.inputs.size(), 2u);
  EXPECT_EQ(spec.output.size(), 2u);
}

TEST(EinsumParse, GroupInferenceWithKnownFactor) {
  auto spec = parse_shapes("n (g c) i, c i -> n g", {{5, 6, 7}, {3, 7}}, {{"g", 2}});
  EXPECT_EQ(spec.sizes.at("c"), 3);
  EXPECT_EQ(spec.sizes.at("g"), 2);
  auto inferred = parse_shapes("n (g c) i -> n g c i", {{5, 6, 7}}, {{"g", 2}});
  EXPECT_EQ(inferred.sizes.at("c"), 3);
}

TEST(EinsumParse, InferenceAcrossTerms) {
  // c is only known after the second term is read.
  auto spec = parse_shapes("(a c) b, c -> a b", {{6, 2}, {3}});
  EXPECT_EQ(spec.sizes.at("a"), 2);
}

TEST(EinsumParse, Errors) {
  EXPECT_EQ(code_of([] { parse_shapes("(a b) -> a b", {{6}}); }), ErrorCode::UnderdeterminedGroup);
  EXPECT_EQ(code_of([] { parse_shapes("(a b) -> a b", {{7}}, {{"a", 2}}); }), ErrorCode::SizeConflict);
  EXPECT_EQ(code_of([] { parse_shapes("ij,jk->ik", {{2, 3}, {4, 4}}); }), ErrorCode::SizeConflict);
  EXPECT_EQ(code_of([] { parse_shapes("ij->ik", {{2, 3}}); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_shapes("ii->i", {{2, 2}}); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_shapes("a b", {{2, 2}}); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_shapes("a (b) -> a", {{2, 2}}); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_shapes("a (b c -> a", {{2, 2}}); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_shapes("a,,b -> a", {{2}, {2}}); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_shapes("A -> A", {{2}}); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_shapes("a(b c) -> a", {{2, 4}}); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_shapes("a -> a -> a", {{2}}); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_shapes("a b -> a", {{2}}); }), ErrorCode::ShapeMismatch);
  EXPECT_EQ(code_of([] { parse_shapes("a, b -> a", {{2}}); }), ErrorCode::ShapeMismatch);
}

TEST(EinsumParse, EquationRoundTrip) {
  auto spec = parse_shapes("n (g c) i, c i -> n g", {{5, 6, 7}, {3, 7}}, {{"g", 2}});
  EXPECT_EQ(spec.equation(), "n (g c) i, c i -> n g");
  auto again = parse(spec.equation(), std::vector<Shape>{{5, 6, 7}, {3, 7}}, {{"g", 2}});
  EXPECT_EQ(again.sizes, spec.sizes);
}

TEST(EinsumPlan, DotProduct) {
  auto p = plan(parse_shapes("i,i->", {{3}, {3}}));
  ASSERT_EQ(p.steps.size(), 1u);
  EXPECT_EQ(p.flops, 3);
  EXPECT_EQ(p.max_intermediate, 1);
  auto r = cost_report(p);
  EXPECT_EQ(r.flops, 3);
  EXPECT_EQ(r.max_intermediate, 1);
  ASSERT_EQ(r.per_step.size(), 1u);
}

TEST(EinsumPlan, PermutationOnly) {
  auto p = plan(parse_shapes("ij->ji", {{2, 5}}));
  EXPECT_TRUE(p.steps.empty());
  EXPECT_EQ(p.flops, 0);
  EXPECT_EQ(p.max_intermediate, 10);
}

TEST(EinsumPlan, MatrixChainAvoidsOuterProduct) {
  auto spec = parse_shapes("ij,jk,kl->il", {{2, 100}, {100, 100}, {100, 2}});
  auto p = plan(spec);
  ASSERT_EQ(p.steps.size(), 2u);
  const auto& first = p.steps.front();
  EXPECT_TRUE((first.left == 0 && first.right == 1) || (first.left == 1 && first.right == 2));
  EXPECT_EQ(p.flops, 2 * 100 * 100 + 2 * 100 * 2);
  EXPECT_EQ(p.max_intermediate, 200);
  for (const auto& s : p.steps) EXPECT_LT(s.result_size, 10000);
  // The other tree costs the same here; the outer-product-free order is never worse.
  std::vector<std::pair<std::size_t, std::size_t>> other{{0, 1}, {0, 1}};
  EXPECT_GE(plan_sequence(spec, other).flops, p.flops);
}

TEST(EinsumPlan, ReduceStepForPrivateIndex) {
  auto p = plan(parse_shapes("ab,b->", {{4, 3}, {3}}));
  ASSERT_EQ(p.steps.size(), 2u);
  EXPECT_EQ(p.steps[0].kind, ContractionStep::Kind::Reduce);
  EXPECT_EQ(p.steps[0].flops, 12);
  EXPECT_EQ(p.steps[1].kind, ContractionStep::Kind::Pairwise);
  EXPECT_EQ(p.flops, 15);
}

TEST(EinsumPlan, GreedyBeyondExhaustiveLimit) {
  // Seven matrices in a chain.
  std::string eq = "ab,bc,cd,de,ef,fg,gh->ah";
  std::vector<Shape> shapes{{2, 3}, {3, 4}, {4, 5}, {5, 4}, {4, 3}, {3, 2}, {2, 2}};
  auto spec = parse(eq, shapes);
  auto p = plan(spec);
  EXPECT_FALSE(p.exhaustive);
  EXPECT_EQ(p.steps.size(), 6u);
  Rng rng(3);
  std::vector<Tensor> ops;
  for (const auto& s : shapes) ops.push_back(random_normal(s, rng));
  EXPECT_LT(relative_error(contract(spec, ops, p), reference::naive_einsum(spec, ops)), 1e-12);
}

TEST(EinsumPlan, BadSequence) {
  auto spec = parse_shapes("ij,jk,kl->il", {{2, 3}, {3, 3}, {3, 2}});
  std::vector<std::pair<std::size_t, std::size_t>> incomplete{{0, 1}};
  EXPECT_THROW(plan_sequence(spec, incomplete), Error);
  std::vector<std::pair<std::size_t, std::size_t>> bad{{0, 0}, {0, 1}};
  EXPECT_THROW(plan_sequence(spec, bad), Error);
}

TEST(EinsumContract, SmallExamples) {
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor m({2, 2}, {1, 2, 3, 4});
  std::vector<Tensor> ops{eye, m};
  EXPECT_EQ(einsum("ij,jk->ik", ops), m);

  std::vector<Tensor> dot{Tensor({3}, {1, 2, 3}), Tensor({3}, {4, 5, 6})};
  EXPECT_EQ(einsum("i,i->", dot).at({}), 32.0);

  std::vector<Tensor> had{Tensor({2, 2}, {1, 2, 3, 4}), Tensor({2, 2}, {5, 6, 7, 8})};
  EXPECT_EQ(einsum("ij,ij->ij", had), Tensor({2, 2}, {5, 12, 21, 32}));
}

TEST(EinsumContract, GroupingIsRowMajor) {
  Tensor x({2, 3}, {0, 1, 2, 3, 4, 5});
  std::vector<Tensor> ops{x};
  EXPECT_EQ(einsum("a b -> (a b)", ops), Tensor({6}, {0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(einsum("a b -> (b a)", ops), Tensor({6}, {0, 3, 1, 4, 2, 5}));
  std::vector<Tensor> flat{Tensor({6}, {0, 1, 2, 3, 4, 5})};
  EXPECT_EQ(einsum("(a b) -> b a", flat, {{"a", 2}}), x.permute({1, 0}));
}

TEST(EinsumContract, ShapeMismatch) {
  auto spec = parse_shapes("ij,jk->ik", {{2, 3}, {3, 4}});
  std::vector<Tensor> ops{Tensor({2, 3}), Tensor({3, 5})};
  EXPECT_EQ(code_of([&] { contract(spec, ops, plan(spec)); }), ErrorCode::ShapeMismatch);
  std::vector<Tensor> one{Tensor({2, 3})};
  EXPECT_EQ(code_of([&] { contract(spec, one, plan(spec)); }), ErrorCode::ShapeMismatch);
}

TEST(EinsumContract, PermutedOperandRelabels) {
  Rng rng(11);
  Tensor a = random_normal({3, 4, 5}, rng);
  Tensor b = random_normal({5, 4}, rng);
  std::vector<Tensor> ops{a, b};
  std::vector<Tensor> permuted{a.permute({2, 0, 1}), b};
  EXPECT_LT(relative_error(einsum("c a b, c b -> a", permuted), einsum("a b c, c b -> a", ops)), 1e-12);
}

TEST(EinsumContract, BatchAndFreeIndices) {
  Rng rng(5);
  std::vector<Shape> shapes{{2, 3, 4, 2}, {3, 2, 5, 2}, {5, 2}};
  std::vector<Tensor> ops;
  for (const auto& s : shapes) ops.push_back(random_normal(s, rng));
  auto spec = parse("b i j x, i b k x, k y -> (b j) y", shapes);
  EXPECT_LT(relative_error(contract(spec, ops, plan(spec)), reference::naive_einsum(spec, ops)), 1e-12);
}
