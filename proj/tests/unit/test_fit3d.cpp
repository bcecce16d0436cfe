#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "vega/error.hpp"
#include "vega/fit3d.hpp"
#include "vega/tensor_io.hpp"

using namespace vega;

namespace {

SceneSpec one_voxel(std::array<int, 3> at) {
  SceneSpec s = empty_scene();
  VoxelObject o;
  o.color = {0.85, 0.15, 0.10};
  o.lo = at;
  o.hi = {at[0] + 1, at[1] + 1, at[2] + 1};
  add_box(s, o);
  return s;
}

std::vector<double> row(const Tensor& t, std::size_t r) {
  return {t.values().begin() + r * t.cols(), t.values().begin() + (r + 1) * t.cols()};
}

EncoderConfig tiny() {
  EncoderConfig c;
  c.embed_dim = 8;
  c.num_blocks = 2;
  c.num_heads = 2;
  c.mlp_ratio = 2;
  return c;
}

}  // namespace

TEST(FeatureField, DeterministicUnitAndDistinct) {
  const SceneSpec s = generate_scene(3, Difficulty::hard);
  const FeatureField a = build_feature_field(s, 9, 32), b = build_feature_field(s, 9, 32);
  EXPECT_TRUE(a.features.bit_equal(b.features));
  std::vector<std::vector<double>> seen;
  for (std::size_t i = 0; i < s.grid.object.size(); ++i) {
    const auto f = row(a.features, i);
    double n2 = 0;
    for (double v : f) n2 += v * v;
    if (!s.grid.occupied(i)) {
      EXPECT_EQ(n2, 0.0);
      continue;
    }
    EXPECT_NEAR(n2, 1.0, 1e-12);
    for (const auto& other : seen) EXPECT_NE(f, other);
    seen.push_back(f);
  }
  EXPECT_FALSE(build_feature_field(s, 10, 32).features.bit_equal(a.features));
}

TEST(FeatureMap, EmptySceneIsBackgroundEverywhere) {
  const SceneSpec s = empty_scene();
  const auto m = render_feature_map(build_feature_field(s, 1, 8), s.cameras[0], 16);
  const Tensor bg = background_feature(8);
  EXPECT_EQ(bg[0], 1.0);
  for (std::size_t p = 0; p < 16; ++p) {
    EXPECT_FALSE(m.hit[p]);
    EXPECT_EQ(row(m.features, p), row(bg.reshaped({1, 8}), 0));
  }
}

TEST(FeatureMap, SingleContributorIsItsFeature) {
  const SceneSpec s = one_voxel({7, 7, 7});
  const FeatureField f = build_feature_field(s, 2, 8);
  const auto m = render_feature_map(f, s.cameras[0], 1);
  ASSERT_TRUE(m.hit[0]);
  const auto voxel = row(f.features, s.grid.index(7, 7, 7));
  for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(m.features[j], voxel[j], 1e-15);
}

TEST(FeatureMap, SameVoxelSameTargetAcrossCameras) {
  const SceneSpec s = one_voxel({6, 9, 8});
  const FeatureField f = build_feature_field(s, 4, 8);
  const auto a = render_feature_map(f, s.cameras[0], 16);
  const auto b = render_feature_map(f, s.cameras[1], 16);
  const auto pairs = target_correspondences(s, s.cameras[0], s.cameras[1], 4);
  ASSERT_EQ(pairs.size(), 1u);
  const auto [pa, pb] = pairs[0];
  ASSERT_TRUE(a.hit[pa]);
  ASSERT_TRUE(b.hit[pb]);
  const auto ra = row(a.features, pa), rb = row(b.features, pb);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(ra[j], rb[j], 1e-15);
}

TEST(FeatureMap, RejectsBadGridAndCamera) {
  const SceneSpec s = one_voxel({7, 7, 7});
  const FeatureField f = build_feature_field(s, 4, 8);
  EXPECT_THROW(render_feature_map(f, s.cameras[0], 15), ValidationError);
  CameraSpec c = s.cameras[0];
  c.focal = 0;
  EXPECT_THROW(render_feature_map(f, c, 16), ValidationError);
}

TEST(Finetune, FixedPointHasZeroLossAndNoUpdate) {
  const EncoderParams enc = init_encoder(tiny());
  const Tensor img = io::quantize_8bit(render_rgb(generate_scene(1, Difficulty::easy), default_cameras()[0]));
  const Tensor target = encode(img, enc).back().tokens;
  const TeacherSample sample{&img, &target};
  FinetuneOptions opt;
  opt.steps = 3;
  opt.batch_size = 2;
  const FinetuneResult r = fit3d_finetune(enc, std::span(&sample, 1), opt);
  for (double l : r.losses) EXPECT_EQ(l, 0.0);
  EXPECT_EQ(r.encoder.hash(), enc.hash());
  EXPECT_TRUE(r.encoder.frozen);
}

TEST(Finetune, ReducesLossWithoutTouchingData) {
  const auto& ctx = vega::test::small_context();
  std::vector<TeacherSample> samples;
  for (std::size_t v = 0; v < ctx.train.num_views(); ++v) samples.push_back({&ctx.train.images[v], &ctx.train.targets[v]});
  const Tensor img0 = ctx.train.images[0], tgt0 = ctx.train.targets[0];
  FinetuneOptions opt;
  opt.steps = 60;
  const FinetuneResult r = fit3d_finetune(init_encoder(EncoderConfig{}), samples, opt);
  ASSERT_EQ(r.losses.size(), 60u);
  for (double l : r.losses) EXPECT_GE(l, 0.0);
  EXPECT_LT(l1_to_targets(r.encoder, samples), l1_to_targets(init_encoder(EncoderConfig{}), samples));
  EXPECT_TRUE(ctx.train.images[0].bit_equal(img0));
  EXPECT_TRUE(ctx.train.targets[0].bit_equal(tgt0));
  for (auto& [name, t] : const_cast<EncoderParams&>(r.encoder).named()) EXPECT_FALSE(t->requires_grad()) << name;
}

TEST(Finetune, RejectsEmptyDatasetAndShapeMismatch) {
  EXPECT_THROW(fit3d_finetune(init_encoder(tiny()), {}, {}), ValidationError);
  const Tensor img({3, 32, 32});
  const Tensor wrong({16, 4});
  const TeacherSample s{&img, &wrong};
  EXPECT_THROW(fit3d_finetune(init_encoder(tiny()), std::span(&s, 1), {}), ValidationError);
}

TEST(Consistency, IdenticalCamerasScoreOne) {
  const SceneSpec s = generate_scene(4, Difficulty::easy);
  const EncoderParams enc = init_encoder(tiny());
  EXPECT_NEAR(consistency_score(enc, s, s.cameras[0], s.cameras[0]), 1.0, 1e-12);
  const double score = consistency_score(enc, s, s.cameras[0], s.cameras[1]);
  EXPECT_GE(score, -1.0);
  EXPECT_LE(score, 1.0);
}

TEST(Consistency, NoSharedVoxelRejected) {
  const SceneSpec s = one_voxel({7, 7, 7});
  CameraSpec away = s.cameras[0];
  away.look_at = away.position - (s.cameras[0].look_at - away.position);
  EXPECT_THROW(consistency_score(init_encoder(tiny()), s, s.cameras[0], away), ValidationError);
}
