#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <optional>

#include "convtn/conv_ops.hpp"
#include "convtn/crs.hpp"
#include "convtn/error.hpp"
#include "convtn/random.hpp"

using namespace convtn;

namespace {

struct Instance {
  ConvSpec spec;
  Tensor x;
  Tensor v_y;
  Tensor exact;
};

Instance make_instance(ConvSpec spec, std::uint64_t seed) {
  Rng rng(seed);
  Tensor x = random_normal(spec.input_shape(), rng);
  Tensor v = random_normal(spec.output_shape(), rng);
  Tensor exact = weight_vjp(spec, x, v).weight;
  return {std::move(spec), std::move(x), std::move(v), std::move(exact)};
}

std::optional<ErrorCode> code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace

TEST(NormalizedError, Examples) {
  const Tensor a({2}, {3, 4});
  EXPECT_EQ(normalized_error(a, a), 0.0);
  EXPECT_DOUBLE_EQ(normalized_error(a, Tensor({2})), 1.0);
  EXPECT_DOUBLE_EQ(normalized_error(a, -1.0 * a), 2.0);
  EXPECT_DOUBLE_EQ(normalized_error(Tensor({2}, {1, 0}), Tensor({2}, {0, 1})), std::sqrt(2.0));
  EXPECT_EQ(code_of([] { normalized_error(Tensor({2}), Tensor({2}, {1, 1})); }), ErrorCode::DivisionByZero);
}

TEST(Crs, KeepAllIsExact) {
  const Instance inst = make_instance({2, 2, 4, 4, {{6, 3, 1, 1}, {5, 2, 2}}, false}, 1);
  CrsConfig cfg{{{"c_in", 1.0}, {"i1", 1.0}, {"i2", 1.0}}, 3};
  const CrsResult r = crs_weight_vjp(inst.spec, inst.x, inst.v_y, cfg);
  EXPECT_LT(relative_error(r.estimate, inst.exact), 1e-14);
  EXPECT_EQ(r.kept_fraction.at("c_in"), 1.0);
}

TEST(Crs, InvalidConfig) {
  const Instance inst = make_instance({1, 1, 2, 2, {{4, 2}}, false}, 2);
  for (double p : {0.0, -0.1, 1.5, std::nan("")}) {
    EXPECT_EQ(code_of([&] { crs_weight_vjp(inst.spec, inst.x, inst.v_y, CrsConfig::channels(p, 0)); }),
              ErrorCode::InvalidProbability)
        << p;
  }
  CrsConfig unknown{{{"k1", 0.5}}, 0};
  EXPECT_EQ(code_of([&] { crs_weight_vjp(inst.spec, inst.x, inst.v_y, unknown); }), ErrorCode::ConfigError);
  CrsConfig missing_axis{{{"i2", 0.5}}, 0};
  EXPECT_EQ(code_of([&] { crs_weight_vjp(inst.spec, inst.x, inst.v_y, missing_axis); }), ErrorCode::ConfigError);
}

TEST(Crs, DroppedChannelGivesZeroSlice) {
  const Instance inst = make_instance({2, 1, 3, 2, {{5, 3}}, false}, 4);
  const CrsConfig cfg = CrsConfig::channels(0.5, 0);
  const CrsMasks masks{{true, false, true}, {}};
  const Tensor est = crs_weight_vjp_masked(inst.spec, inst.x, inst.v_y, masks, cfg);
  for (Index co = 0; co < 2; ++co)
    for (Index k = 0; k < 3; ++k) {
      EXPECT_EQ(est.at({co, 1, k}), 0.0);
      EXPECT_NEAR(est.at({co, 0, k}), 2.0 * inst.exact.at({co, 0, k}), 1e-12);
    }
}

TEST(Crs, EnumerationIsUnbiased) {
  const Instance inst = make_instance({2, 1, 3, 2, {{4, 2, 1, 1}}, false}, 5);
  const double pc = 0.3, ps = 0.6;
  const CrsConfig cfg{{{"c_in", pc}, {"i1", ps}}, 0};
  Tensor mean(inst.exact.shape());
  const int bits = 3 + 4;
  for (int m = 0; m < (1 << bits); ++m) {
    CrsMasks masks{std::vector<bool>(3), {std::vector<bool>(4)}};
    double prob = 1.0;
    for (int b = 0; b < bits; ++b) {
      const bool keep = (m >> b) & 1;
      const double p = b < 3 ? pc : ps;
      prob *= keep ? p : 1 - p;
      if (b < 3) masks.channels[static_cast<std::size_t>(b)] = keep;
      else masks.spatial[0][static_cast<std::size_t>(b - 3)] = keep;
    }
    mean = mean + prob * crs_weight_vjp_masked(inst.spec, inst.x, inst.v_y, masks, cfg);
  }
  EXPECT_LT(relative_error(mean, inst.exact), 1e-12);
}

TEST(Crs, MasksAreReproducible) {
  const ConvSpec s{1, 1, 8, 2, {{9, 3}, {9, 3}}, false};
  const CrsConfig cfg{{{"c_in", 0.5}, {"i2", 0.5}}, 42};
  const CrsMasks a = draw_masks(s, cfg);
  const CrsMasks b = draw_masks(s, cfg);
  EXPECT_EQ(a.channels, b.channels);
  EXPECT_EQ(a.spatial, b.spatial);
  EXPECT_TRUE(a.spatial[0].empty());
  EXPECT_EQ(a.spatial[1].size(), 9u);
}

TEST(Crs, ErrorShrinksWithKeepProbability) {
  const Instance inst = make_instance({4, 1, 8, 4, {{8, 3, 1, 1}, {8, 3, 1, 1}}, false}, 6);
  double previous = INFINITY;
  for (double p : {0.25, 0.5, 0.75, 0.95}) {
    double total = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      total += normalized_error(
          inst.exact, crs_weight_vjp(inst.spec, inst.x, inst.v_y, CrsConfig::spatial(inst.spec, p, seed)).estimate);
    }
    EXPECT_LT(total / 200, previous) << p;
    previous = total / 200;
  }
}
