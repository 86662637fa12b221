#include <gtest/gtest.h>

#include "convtn/einsum.hpp"
#include "convtn/error.hpp"
#include "convtn/index_pattern.hpp"
#include "convtn/random.hpp"

using namespace convtn;

TEST(OutputSize, Examples) {
  EXPECT_EQ(output_size({28, 5, 1, 0, 1}), 24);
  EXPECT_EQ(output_size({4, 2, 2, 0, 1}), 2);
  EXPECT_EQ(output_size({1, 1, 1, 0, 1}), 1);
  EXPECT_EQ(output_size({5, 3, 2, 1, 2}), 2);
  EXPECT_THROW(output_size({2, 3, 1, 0, 1}), Error);
  EXPECT_THROW(output_size({2, 1, 0, 0, 1}), Error);
}

TEST(InputSizeFromOutput, Examples) {
  EXPECT_EQ(input_size_from_output(2, 2, 2, 0, 1, 0), 4);
  EXPECT_EQ(input_size_from_output(1, 1, 1, 0, 1, 0), 1);
  EXPECT_EQ(input_size_from_output(2, 1, 2, 0, 1, 1), 4);
  EXPECT_EQ(output_size({4, 1, 2, 0, 1}), 2);
  EXPECT_THROW(input_size_from_output(2, 1, 2, 0, 1, 2), Error);
  EXPECT_THROW(input_size_from_output(1, 1, 1, 3, 1, 0), Error);
}

TEST(InputSizeFromOutput, RoundTrips) {
  for (Index i = 1; i <= 9; ++i)
    for (Index k = 1; k <= 4; ++k)
      for (Index s = 1; s <= 3; ++s)
        for (Index p = 0; p <= 2; ++p)
          for (Index d = 1; d <= 2; ++d) {
            const DimSpec dim{i, k, s, p, d};
            Index o;
            try {
              o = output_size(dim);
            } catch (const Error&) {
              continue;
            }
            EXPECT_EQ(input_size_from_output(o, k, s, p, d, output_padding_of(dim)), i) << to_string(dim);
          }
}

TEST(Pattern, SmallTable) {
  const auto p = pattern({3, 2, 1, 0, 1});
  EXPECT_EQ(p->output_size, 2);
  EXPECT_EQ(p->nnz(), 4);
  const std::vector<std::array<Index, 3>> expected{{0, 0, 0}, {1, 0, 1}, {1, 1, 0}, {2, 1, 1}};
  EXPECT_EQ(p->triples(), expected);
  for (double v : p->table.data()) EXPECT_TRUE(v == 0.0 || v == 1.0);
  EXPECT_EQ(p->kind, PatternKind::General);
}

TEST(Pattern, PointwiseIsIdentity) {
  const auto p = pattern({2, 1, 1, 0, 1});
  EXPECT_EQ(p->table, Tensor({2, 2, 1}, {1, 0, 0, 1}));
  EXPECT_EQ(p->kind, PatternKind::Dense);
}

TEST(Pattern, DownSampling) {
  const auto p = pattern({4, 1, 2, 0, 1});
  EXPECT_EQ(p->kind, PatternKind::DownSampling);
  const std::vector<std::array<Index, 3>> expected{{0, 0, 0}, {2, 1, 0}};
  EXPECT_EQ(p->triples(), expected);
}

TEST(Pattern, Classification) {
  EXPECT_EQ(classify({8, 4, 4, 0, 1}), PatternKind::Dense);
  EXPECT_EQ(classify({9, 4, 4, 0, 1}), PatternKind::General);
  EXPECT_EQ(classify({8, 4, 4, 1, 1}), PatternKind::General);
  EXPECT_EQ(classify({8, 1, 2, 0, 1}), PatternKind::DownSampling);
  EXPECT_EQ(classify({9, 1, 2, 0, 1}), PatternKind::General);
  EXPECT_EQ(classify({9, 2, 3, 0, 1}), PatternKind::DownSampling);
  EXPECT_EQ(classify({8, 2, 2, 0, 2}), PatternKind::General);
}

TEST(Pattern, CacheReturnsSameObject) {
  const auto a = pattern({7, 3, 2, 1, 1});
  const auto b = pattern({7, 3, 2, 1, 1});
  EXPECT_EQ(a.get(), b.get());
}

TEST(AveragedPattern, Examples) {
  EXPECT_EQ(averaged_pattern({2, 2, 1, 0, 1}), Tensor({2, 2}, {1, 0, 0, 1}));
  EXPECT_EQ(averaged_pattern({3, 2, 1, 0, 1}), Tensor({3, 2}, {.5, 0, .5, .5, 0, .5}));
  const auto avg = averaged_pattern({7, 3, 2, 1, 2});
  const auto p = pattern({7, 3, 2, 1, 2});
  double mass = 0;
  for (double v : avg.data()) mass += v;
  EXPECT_NEAR(mass, static_cast<double>(p->nnz()) / p->output_size, 1e-15);
}

TEST(KernelOutputSwap, SelfDualExample) {
  const auto p = pattern({3, 2, 1, 0, 1});
  const IndexPattern s = kernel_output_swap(*p);
  EXPECT_EQ(s.dim, (DimSpec{3, 2, 1, 0, 1}));
  EXPECT_EQ(s.table, p->table.permute({0, 2, 1}));
}

TEST(KernelOutputSwap, BoundaryPixels) {
  try {
    kernel_output_swap(*pattern({5, 2, 2, 0, 1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BoundaryPixels);
  }
}

TEST(KernelOutputSwap, PreservesEqualStrideAndDilation) {
  const DimSpec d{9, 3, 2, 1, 2};
  ASSERT_TRUE(no_boundary_pixels(d));
  const DimSpec s = swapped_dim(d);
  EXPECT_EQ(s.stride, 2);
  EXPECT_EQ(s.dilation, 2);
  EXPECT_EQ(kernel_output_swap(kernel_output_swap(*pattern(d))).table, pattern(d)->table);
}

TEST(SubsampleChecks, Examples) {
  EXPECT_TRUE(stride_subsample_check({4, 2, 2, 0, 1}));
  EXPECT_TRUE(stride_subsample_check({5, 3, 1, 1, 1}));
  EXPECT_TRUE(dilation_subsample_check({7, 3, 1, 1, 2}));
  EXPECT_TRUE(dilation_subsample_check({4, 2, 2, 0, 1}));
}

TEST(DenseRewrite, ContractionIsReshape) {
  Rng rng(2);
  const DimSpec d{8, 4, 4, 0, 1};
  const auto p = pattern(d);
  const Tensor v = random_normal({3, 8}, rng);
  std::vector<Tensor> ops{v, p->table};
  const Tensor contracted = einsum("a i, i o k -> a o k", ops);
  EXPECT_EQ(contracted, v.reshape({3, 2, 4}));
}

TEST(DownsampleRewrite, NarrowThenDense) {
  Rng rng(3);
  const DimSpec d{9, 2, 3, 0, 1};
  ASSERT_EQ(classify(d), PatternKind::DownSampling);
  const Tensor v = random_normal({2, 9}, rng);
  std::vector<Tensor> ops{v, pattern(d)->table};
  const Tensor reference = einsum("a i, i o k -> a o k", ops);
  const Tensor narrowed = v.reshape({2, 3, 3}).narrow(2, 0, 2).reshape({2, 6});
  std::vector<Tensor> dense_ops{narrowed, pattern({6, 2, 2, 0, 1})->table};
  EXPECT_EQ(einsum("a i, i o k -> a o k", dense_ops), reference);
}
