#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <set>

#include "vega/error.hpp"
#include "vega/rng.hpp"
#include "vega/tensor.hpp"

using namespace vega;

TEST(Tensor, ShapeAndMatrixView) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_EQ(t.rows(), 6u);
  EXPECT_EQ(t.cols(), 4u);
  for (double v : t.values()) EXPECT_EQ(v, 0.0);
}

TEST(Tensor, FromRowsAndAt) {
  const Tensor t = Tensor::from_rows({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(t.shape(), (Shape{2, 3}));
  EXPECT_EQ(t.at(1, 2), 6.0);
  EXPECT_THROW(Tensor::from_rows({{1, 2}, {3}}), ValidationError);
}

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor(Shape{}), ValidationError);
  EXPECT_THROW(Tensor(Shape{2, 0}), ValidationError);
  EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0, 3.0}), ValidationError);
  EXPECT_THROW(Tensor({2, 3}).reshaped({4}), ValidationError);
  EXPECT_THROW(Tensor({2}).item(), ValidationError);
}

TEST(Tensor, GradBufferFollowsFlag) {
  Tensor t({3});
  EXPECT_TRUE(t.grad().empty());
  t.set_requires_grad(true);
  ASSERT_EQ(t.grad().size(), 3u);
  t.grad()[1] = 2.0;
  t.zero_grad();
  EXPECT_EQ(t.grad()[1], 0.0);
  const Tensor d = t.detached();
  EXPECT_FALSE(d.requires_grad());
  t.set_requires_grad(false);
  EXPECT_TRUE(t.grad().empty());
}

TEST(Tensor, BitEqualDistinguishesSignedZero) {
  const Tensor a({1}, {0.0});
  const Tensor b({1}, {-0.0});
  EXPECT_FALSE(a.bit_equal(b));
  EXPECT_TRUE(a.bit_equal(a.reshaped({1})));
  EXPECT_TRUE(a.all_finite());
  EXPECT_FALSE(Tensor({1}, {std::nan("")}).all_finite());
}

TEST(Rng, SplitmixReferenceValue) {
  std::uint64_t s = 0;
  EXPECT_EQ(splitmix64(s), 0xe220a8397b1dcdafULL);
}

TEST(Rng, XoshiroReferenceSequence) {
  // Reference output of xoshiro256** from state {1, 2, 3, 4}.
  Rng r = Rng::from_state({1, 2, 3, 4});
  EXPECT_EQ(r.next_u64(), 11520u);
  EXPECT_EQ(r.next_u64(), 0u);
  EXPECT_EQ(r.next_u64(), 1509978240u);
  EXPECT_EQ(r.next_u64(), 1215971899390074240u);
}

TEST(Rng, SeedingGoesThroughSplitmix) {
  std::uint64_t s = 42;
  std::array<std::uint64_t, 4> expected{};
  for (auto& w : expected) w = splitmix64(s);
  EXPECT_EQ(Rng(42).state(), expected);
}

TEST(Rng, DeterministicAndStateRestorable) {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  Rng c = Rng::from_state(a.state());
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.normal(), c.normal());
}

TEST(Rng, UniformAndBelowRanges) {
  Rng r(3);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    const auto k = r.below(7);
    EXPECT_LT(k, 7u);
    seen.insert(k);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Rng, NormalMoments) {
  Rng r(11);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, DerivedStreamsDiffer) {
  std::set<std::uint64_t> seeds;
  for (std::uint64_t stream = 0; stream < 64; ++stream) seeds.insert(derive_seed(9, stream));
  EXPECT_EQ(seeds.size(), 64u);
  EXPECT_EQ(derive_seed(9, 2), derive_seed(9, 2));
  EXPECT_NE(derive_seed(9, 2), derive_seed(10, 2));
}
