#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "vega/dataset.hpp"
#include "vega/error.hpp"
#include "vega/scene.hpp"
#include "vega/tensor_io.hpp"

using namespace vega;
using vega::test::TempDir;

namespace {

SceneSpec single_box(std::array<int, 3> lo, int size) {
  SceneSpec s = empty_scene();
  VoxelObject o;
  o.color = {0.85, 0.15, 0.10};
  o.lo = lo;
  o.hi = {lo[0] + size, lo[1] + size, lo[2] + size};
  add_box(s, o);
  return s;
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Scene, GenerationIsDeterministic) {
  for (Difficulty d : {Difficulty::easy, Difficulty::hard}) {
    const SceneSpec a = generate_scene(17, d), b = generate_scene(17, d);
    EXPECT_EQ(a.grid.object, b.grid.object);
    EXPECT_EQ(a.voxel_color, b.voxel_color);
    EXPECT_EQ(a.cameras, b.cameras);
    EXPECT_EQ(a.background, b.background);
    EXPECT_TRUE(render_rgb(a, a.cameras[1]).bit_equal(render_rgb(b, b.cameras[1])));
  }
}

TEST(Scene, DistractorCountsPerDifficulty) {
  std::set<std::size_t> easy, hard;
  for (std::uint64_t s = 0; s < 300; ++s) {
    easy.insert(generate_scene(s, Difficulty::easy).distractor_count());
    hard.insert(generate_scene(s, Difficulty::hard).distractor_count());
  }
  EXPECT_EQ(easy, (std::set<std::size_t>{0, 1}));
  EXPECT_EQ(hard, (std::set<std::size_t>{2, 3, 4}));
}

TEST(Scene, HardSplitJittersCameraAndBackground) {
  const SceneSpec easy = generate_scene(1, Difficulty::easy);
  const auto defaults = default_cameras();
  EXPECT_EQ(easy.cameras, defaults);
  std::set<double> backgrounds;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const SceneSpec hard = generate_scene(s, Difficulty::hard);
    EXPECT_NE(hard.cameras[0].position.y, defaults[0].position.y);
    backgrounds.insert(hard.background.r);
    EXPECT_EQ(generate_scene(s, Difficulty::easy).background, easy.background);
  }
  EXPECT_GT(backgrounds.size(), 90u);
}

TEST(Scene, GroundTruthActionIsNormalizedCentroid) {
  const SceneSpec centred = single_box({7, 7, 7}, 2);
  const Action a = ground_truth_action(centred);
  EXPECT_EQ(a, (Action{0.5, 0.5, 0.5, 1.0}));
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Action g = ground_truth_action(generate_scene(s, Difficulty::hard));
    for (double v : g) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Scene, DepthOnlyChangeMovesOnlyZ) {
  const Action a = ground_truth_action(single_box({4, 5, 3}, 2));
  const Action b = ground_truth_action(single_box({4, 5, 9}, 2));
  EXPECT_EQ(a[0], b[0]);
  EXPECT_EQ(a[1], b[1]);
  EXPECT_NE(a[2], b[2]);
  EXPECT_EQ(a[3], b[3]);
}

TEST(Scene, MonocularAmbiguityPair) {
  // Same box one voxel deeper: the front view cannot tell them apart.
  const SceneSpec near_box = single_box({7, 7, 6}, 2), far_box = single_box({7, 7, 7}, 2);
  const Tensor a = render_rgb(near_box, near_box.cameras[0]);
  const Tensor b = render_rgb(far_box, far_box.cameras[0]);
  std::size_t differing = 0;
  for (std::size_t i = 0; i < a.size(); ++i) differing += a[i] != b[i];
  EXPECT_LE(differing, a.size() / 200);
  EXPECT_NE(ground_truth_action(near_box)[2], ground_truth_action(far_box)[2]);
  // The oblique camera does see the difference.
  EXPECT_FALSE(render_rgb(near_box, near_box.cameras[1]).bit_equal(render_rgb(far_box, far_box.cameras[1])));
}

TEST(Render, EmptySceneIsUniformBackground) {
  const SceneSpec s = empty_scene();
  const Tensor img = render_rgb(s, s.cameras[0]);
  ASSERT_EQ(img.shape(), (Shape{3, kImageSize, kImageSize}));
  const std::size_t plane = kImageSize * kImageSize;
  for (std::size_t i = 0; i < plane; ++i) {
    EXPECT_EQ(img[i], s.background.r);
    EXPECT_EQ(img[plane + i], s.background.g);
    EXPECT_EQ(img[2 * plane + i], s.background.b);
  }
}

TEST(Render, CentredVoxelLandsInCentralRegion) {
  SceneSpec s = single_box({7, 7, 7}, 2);
  const Tensor img = render_rgb(s, s.cameras[0]);
  const std::size_t n = kImageSize;
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t u = 0; u < n; ++u) {
      const bool changed = img[v * n + u] != s.background.r;
      if (changed) {
        EXPECT_GE(u, n / 2 - 4);
        EXPECT_LT(u, n / 2 + 4);
        EXPECT_GE(v, n / 2 - 4);
        EXPECT_LT(v, n / 2 + 4);
      }
    }
  EXPECT_NE(img[(n / 2) * n + n / 2], s.background.r);
}

TEST(Render, PixelsInUnitRange) {
  const SceneSpec s = generate_scene(5, Difficulty::hard);
  for (const auto& cam : s.cameras)
    for (double v : render_rgb(s, cam).values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
}

TEST(Camera, DegenerateCamerasRejected) {
  CameraSpec c = default_cameras()[0];
  c.focal = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = default_cameras()[0];
  c.look_at = c.position;
  EXPECT_THROW(c.validate(), ValidationError);
  c = default_cameras()[0];
  c.look_at = c.position + Vec3{0, 5, 0};
  EXPECT_THROW(c.validate(), ValidationError);
  const SceneSpec s = empty_scene();
  c.focal = -1;
  EXPECT_THROW(render_rgb(s, c), ValidationError);
}

TEST(Camera, ProjectionOfLookAtIsImageCentre) {
  const CameraSpec c = default_cameras()[1];
  const auto p = project_point(c, c.look_at);
  ASSERT_TRUE(p.has_value());
  EXPECT_NEAR((*p)[0], kImageSize / 2.0, 1e-9);
  EXPECT_NEAR((*p)[1], kImageSize / 2.0, 1e-9);
  EXPECT_FALSE(project_point(c, c.position - (c.look_at - c.position)).has_value());
}

TEST(TensorIo, RoundTripsBothPrecisions) {
  const Tensor t = vega::test::random_tensor({2, 3, 4}, 1);
  const Tensor d = io::decode_tensor(io::encode_tensor(t, io::Precision::f64), "t");
  EXPECT_TRUE(d.bit_equal(t));
  const Tensor f = io::decode_tensor(io::encode_tensor(t, io::Precision::f32), "t");
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(f[i], static_cast<double>(static_cast<float>(t[i])));
  std::string bytes = io::encode_tensor(t, io::Precision::f64);
  EXPECT_THROW(io::decode_tensor(bytes.substr(0, bytes.size() - 1), "t"), ValidationError);
  EXPECT_THROW(io::decode_tensor(bytes + "x", "t"), ValidationError);
  bytes[0] = 'X';
  EXPECT_THROW(io::decode_tensor(bytes, "t"), ValidationError);
}

TEST(TensorIo, PpmRoundTripOnEightBitGrid) {
  const Tensor img = io::quantize_8bit(vega::test::random_tensor({3, 5, 7}, 2, 0, 1));
  EXPECT_TRUE(io::decode_ppm(io::encode_ppm(img), "p").bit_equal(img));
  EXPECT_THROW(io::decode_ppm("P3\n1 1\n255\n", "p"), ValidationError);
}

TEST(Dataset, RoundTripIsBitExact) {
  TempDir dir;
  const Dataset a = vega::test::make_split(dir / "a", 0, 6, Difficulty::hard);
  save_dataset(dir / "b", a);
  const Dataset b = load_dataset(dir / "b");
  EXPECT_EQ(a.manifest, b.manifest);
  ASSERT_EQ(a.num_views(), b.num_views());
  EXPECT_EQ(a.views_per_scene(), 2u);
  for (std::size_t v = 0; v < a.num_views(); ++v) {
    EXPECT_TRUE(a.images[v].bit_equal(b.images[v]));
    EXPECT_TRUE(a.targets[v].bit_equal(b.targets[v]));
  }
  EXPECT_TRUE(a.actions.bit_equal(b.actions));
  for (const char* f : {"manifest.json", "actions.vegt", "images/scene3_cam1.ppm", "targets/scene3_cam1.vegt"})
    EXPECT_EQ(io::read_file(dir / "a" / f), io::read_file(dir / "b" / f)) << f;
}

TEST(Dataset, RegeneratesScenesAndActions) {
  TempDir dir;
  const Dataset ds = vega::test::make_split(dir.path(), 0, 4, Difficulty::easy);
  for (std::size_t i = 0; i < ds.num_scenes(); ++i) {
    const SceneSpec s = ds.scene(i);
    EXPECT_EQ(ground_truth_action(s), ds.action(i));
    EXPECT_TRUE(ds.images[2 * i].bit_equal(io::quantize_8bit(render_rgb(s, s.cameras[0]))));
  }
}

TEST(Dataset, SplitsUseDisjointSeeds) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t split = 0; split < 3; ++split)
    for (std::size_t i = 0; i < 200; ++i) EXPECT_TRUE(seen.insert(scene_seed(0, split, i)).second);
}

TEST(Dataset, DistinctDiagnostics) {
  TempDir dir;
  vega::test::make_split(dir.path(), 0, 3, Difficulty::easy);
  const auto root = dir.path();

  const std::string image = (root / "images/scene1_cam0.ppm").string();
  const std::string bytes = io::read_file(image);
  io::write_file(image, bytes.substr(0, bytes.size() - 10));
  const std::string truncated = error_of([&] { load_dataset(root); });
  EXPECT_NE(truncated.find("scene1_cam0.ppm"), std::string::npos) << truncated;
  EXPECT_NE(truncated.find("truncated"), std::string::npos) << truncated;
  io::write_file(image, bytes);

  std::filesystem::rename(root / "targets/scene2_cam1.vegt", root / "moved.vegt");
  const std::string missing = error_of([&] { load_dataset(root); });
  EXPECT_NE(missing.find("missing"), std::string::npos) << missing;
  EXPECT_NE(missing.find("scene2_cam1.vegt"), std::string::npos) << missing;
  std::filesystem::rename(root / "moved.vegt", root / "targets/scene2_cam1.vegt");

  const std::string manifest = io::read_file(root / "manifest.json");
  std::string bumped = manifest;
  bumped.replace(bumped.find(kDatasetVersion), std::string(kDatasetVersion).size(), "vega-dataset/2");
  io::write_file(root / "manifest.json", bumped);
  const std::string version = error_of([&] { load_dataset(root); });
  EXPECT_NE(version.find("version"), std::string::npos) << version;

  io::write_file(root / "manifest.json", "{ not json");
  const std::string malformed = error_of([&] { load_dataset(root); });
  EXPECT_NE(malformed.find("malformed manifest"), std::string::npos) << malformed;

  io::write_file(root / "manifest.json", manifest);
  EXPECT_NO_THROW(load_dataset(root));
  EXPECT_EQ(std::set<std::string>({truncated, missing, version, malformed}).size(), 4u);
}
