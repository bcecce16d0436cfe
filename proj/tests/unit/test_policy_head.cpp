#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "vega/error.hpp"
#include "vega/gradcheck.hpp"
#include "vega/gradient_suite.hpp"
#include "vega/policy_head.hpp"

using namespace vega;
using vega::test::random_tensor;

TEST(PolicyHead, ZeroTokensAndBiasesGiveZeroAction) {
  const ActionHeadParams h = init_action_head(8, kActionDim, 1);
  PatchTokenMap m;
  m.tokens = Tensor({16, 8});
  for (double v : predict_action(m, h)) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(h.w1.shape(), (Shape{8, 16}));
  EXPECT_EQ(h.parameter_count(), 8u * 16 + 16 + 16 * 4 + 4);
}

TEST(PolicyHead, TokenPermutationInvariant) {
  const ActionHeadParams h = init_action_head(8, kActionDim, 2);
  PatchTokenMap a;
  a.tokens = random_tensor({6, 8}, 3);
  PatchTokenMap b = a;
  for (std::size_t c = 0; c < 8; ++c) std::swap(b.tokens[0 * 8 + c], b.tokens[5 * 8 + c]);
  const Action pa = predict_action(a, h), pb = predict_action(b, h);
  for (std::size_t i = 0; i < kActionDim; ++i) EXPECT_NEAR(pa[i], pb[i], 1e-14);
  a.tokens = random_tensor({6, 7}, 3);
  EXPECT_THROW(predict_action(a, h), ValidationError);
}

TEST(PolicyHead, GradientMatchesFiniteDifferences) {
  ActionHeadParams h = init_action_head(6, kActionDim, 4);
  for (double& v : h.b1.values()) v = 0.1;
  const Tensor w = random_tensor({2, kActionDim}, 5);
  const double err = ad::finite_difference_check(
      [&](ad::Tape& t, ad::Var x) { return ad::sum(ad::mul(action_head_forward(t, h, x, 3), t.constant(w))); },
      random_tensor({6, 6}, 6));
  EXPECT_LT(err, 1e-5);
}

TEST(SuccessProxy, Boundaries) {
  const Action gt{0.0, 0.0, 0.0, 1.0};
  EXPECT_TRUE(success_proxy(gt, gt, 1e-9));
  EXPECT_FALSE(success_proxy({0.1, 0.0, 0.0, 1.0}, gt, 0.1));
  EXPECT_TRUE(success_proxy({0.0999, 0.0, 0.0, 1.0}, gt, 0.1));
  EXPECT_FALSE(success_proxy({0.0, 0.0, 0.0, 0.4}, {0.0, 0.0, 0.0, 1.0}, 0.1));
  EXPECT_TRUE(success_proxy({0.0, 0.0, 0.0, 0.6}, {0.0, 0.0, 0.0, 1.0}, 0.1));
  EXPECT_THROW(success_proxy(gt, gt, 0.0), ValidationError);
  EXPECT_THROW(success_proxy({0, 0, 0}, gt, 0.1), ValidationError);
}

TEST(SuccessProxy, MonotoneInError) {
  const Action gt{0.5, 0.5, 0.5, 1.0};
  bool was = true;
  for (double e = 0.0; e < 0.3; e += 0.01) {
    const bool now = success_proxy({0.5 + e, 0.5, 0.5, 1.0}, gt, 0.2);
    EXPECT_FALSE(now && !was);
    was = now;
  }
}

TEST(GradientSuite, FixedSeedsPass) {
  const auto entries = run_gradient_suite(gradient_suite_seeds());
  EXPECT_EQ(entries.size(), 20u * 21u);
  for (const auto& e : entries) EXPECT_LT(e.max_rel_error, 1e-5) << e.name << " seed " << e.seed;
  EXPECT_LT(worst_error(entries), 1e-5);
}
