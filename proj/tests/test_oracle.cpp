#include <gtest/gtest.h>

#include <cmath>

#include "convtn/conv_ops.hpp"
#include "convtn/error.hpp"
#include "convtn/oracle.hpp"
#include "convtn/random.hpp"

using namespace convtn;

TEST(FiniteDifference, SumAndSquaredNorm) {
  Rng rng(1);
  const Tensor t = random_normal({3, 4}, rng);
  const auto sum = [](const Tensor& a) {
    double s = 0;
    for (double v : a.data()) s += v;
    return s;
  };
  EXPECT_LT(max_abs(oracle::finite_difference_vjp(sum, t) - Tensor::ones({3, 4})), 1e-9);
  const auto half_sq = [](const Tensor& a) { return 0.5 * inner(a, a); };
  EXPECT_LT(relative_error(oracle::finite_difference_vjp(half_sq, t), t), 1e-8);
}

TEST(FiniteDifference, MatchesWeightVjp) {
  Rng rng(2);
  const ConvSpec s{2, 1, 2, 3, {{5, 3, 2, 1}, {4, 2, 1, 0, 2}}, false};
  const Tensor x = random_normal(s.input_shape(), rng);
  const Tensor w = random_normal(s.kernel_shape(), rng);
  const Tensor v = random_normal(s.output_shape(), rng);
  const auto loss = [&](const Tensor& k) { return inner(v, oracle::direct_conv(s, x, k)); };
  EXPECT_LT(relative_error(weight_vjp(s, x, v).weight, oracle::finite_difference_vjp(loss, w)), 1e-7);
}

TEST(SymEigMin, Examples) {
  EXPECT_NEAR(oracle::sym_eig_min(Tensor({2, 2}, {2, 0, 0, 3})), 2.0, 1e-14);
  EXPECT_NEAR(oracle::sym_eig_min(Tensor({2, 2}, {0, 1, 1, 0})), -1.0, 1e-14);
  EXPECT_NEAR(oracle::sym_eig_min(Tensor({2, 2}, {1, 1, 1, 1})), 0.0, 1e-14);
}

TEST(DirectConv, GroupsSplitIntoIndependentConvs) {
  Rng rng(3);
  const ConvSpec grouped{2, 2, 4, 6, {{6, 3, 1, 1}, {5, 2, 2}}, false};
  const Tensor x = random_normal(grouped.input_shape(), rng);
  const Tensor w = random_normal(grouped.kernel_shape(), rng);
  const Tensor y = oracle::direct_conv(grouped, x, w);
  ConvSpec single = grouped;
  single.groups = 1;
  single.in_channels = 2;
  single.out_channels = 3;
  for (Index g = 0; g < 2; ++g) {
    const Tensor part = oracle::direct_conv(single, x.narrow(1, 2 * g, 2), w.narrow(0, 3 * g, 3));
    EXPECT_LT(relative_error(y.narrow(1, 3 * g, 3), part), 1e-15);
  }
}

TEST(DirectConv, WindowSums) {
  const ConvSpec s{1, 1, 1, 1, {{3, 2}, {3, 2}}, false};
  const Tensor x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  EXPECT_EQ(oracle::direct_conv(s, x, Tensor::ones({1, 1, 2, 2})), Tensor({1, 1, 2, 2}, {12, 16, 24, 28}));
}

TEST(Toeplitz, PointwiseIsScaledIdentity) {
  const ConvSpec s{1, 1, 1, 1, {{3, 1}}, false};
  Tensor expected({3, 3});
  for (Index i = 0; i < 3; ++i) expected.at({i, i}) = 2.5;
  EXPECT_EQ(oracle::toeplitz(s, Tensor::full({1, 1, 1}, 2.5)), expected);
}

TEST(Toeplitz, BandedExample) {
  const ConvSpec s{1, 1, 1, 1, {{3, 2}}, false};
  EXPECT_EQ(oracle::toeplitz(s, Tensor({1, 1, 2}, {5, 7})), Tensor({2, 3}, {5, 7, 0, 0, 5, 7}));
}

TEST(Toeplitz, MatchesUnfoldKernel) {
  Rng rng(4);
  const ConvSpec s{1, 1, 2, 3, {{6, 3, 2, 1}, {4, 2, 1, 1, 2}}, false};
  const Tensor w = random_normal(s.kernel_shape(), rng);
  EXPECT_LT(relative_error(unfold_kernel(s, w), oracle::toeplitz(s, w)), 1e-15);
}

TEST(GgnExplicit, DiagonalOfFullMatrix) {
  Rng rng(5);
  const ConvSpec s{2, 1, 2, 2, {{4, 2, 1, 1}, {3, 2}}, false};
  const Tensor x = random_normal(s.input_shape(), rng);
  const Tensor s_y = random_normal(input_shapes(Op::GgnGram, s, 3)[1], rng);
  const oracle::GgnExplicit g = oracle::ggn_explicit(s, x, s_y);
  const Index p = g.ggn.size(0);
  for (Index i = 0; i < p; ++i) EXPECT_NEAR(g.diagonal.data()[static_cast<std::size_t>(i)], g.ggn.at({i, i}), 1e-12);
  EXPECT_GE(oracle::sym_eig_min(g.ggn), -1e-10);
  EXPECT_LT(relative_error(ggn_diagonal(s, x, s_y), g.diagonal), 1e-12);
  EXPECT_LT(relative_error(per_sample_ggn_diagonal(s, x, s_y), g.per_sample_diagonal), 1e-12);
  EXPECT_LT(relative_error(ggn_gram(s, x, s_y), g.gram), 1e-12);
}

TEST(GgnExplicit, RejectsLargeLayers) {
  Rng rng(6);
  const ConvSpec s{1, 1, 16, 16, {{5, 3}, {5, 3}}, false};
  try {
    oracle::ggn_explicit(s, Tensor(s.input_shape()), Tensor(input_shapes(Op::GgnGram, s, 1)[1]));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Unsupported);
  }
}

TEST(Hesscale, MatchesExplicit) {
  Rng rng(7);
  const ConvSpec s{2, 1, 2, 2, {{5, 3, 2, 1}, {4, 2}}, false};
  const Tensor x = random_normal(s.input_shape(), rng);
  const Tensor w = random_normal(s.kernel_shape(), rng);
  const Tensor d = random_uniform(s.output_shape(), rng);
  EXPECT_LT(relative_error(hesscale_weight_diag(s, x, d), oracle::hesscale_weight_explicit(s, x, d)), 1e-12);
  EXPECT_LT(relative_error(hesscale_input_diag(s, w, d), oracle::hesscale_input_explicit(s, w, d)), 1e-12);
}

TEST(KfacOracle, MaterializedSize) {
  Rng rng(8);
  const ConvSpec s{4, 1, 32, 32, {{16, 4, 4}, {16, 4, 4}}, false};
  Index materialized = 0;
  oracle::kfac_expand(s, random_normal(s.input_shape(), rng), &materialized);
  EXPECT_EQ(materialized, 4 * 32 * 16 * 16);
}
