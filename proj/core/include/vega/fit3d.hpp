#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vega/encoder.hpp"
#include "vega/scene.hpp"

namespace vega {

/// Per-voxel feature vectors of dimension `dim` over a scene's occupancy.
/// A voxel's feature depends only on its position, its object's colour class
/// and the field seed, never on a camera, so every view sees the same value.
struct FeatureField {
  OccupancyGrid grid;
  std::size_t dim = 0;
  Tensor features;  // [voxels x dim]; zero rows for empty voxels
};

FeatureField build_feature_field(const SceneSpec& scene, std::uint64_t seed, std::size_t dim);

// e_1 of the given dimension; the target for patches that see no voxel.
Tensor background_feature(std::size_t dim);

struct RenderedFeatureMap {
  Tensor features;        // [N x dim]
  std::vector<bool> hit;  // patch saw at least one occupied voxel
};

/// Patch targets for one view. Each of the N = g*g patches (square grid over
/// the image) gets the mean feature of the front-surface voxels its pixels
/// hit, weighted by pixel count; patches with no hit get background_feature.
RenderedFeatureMap render_feature_map(const FeatureField& field, const CameraSpec& camera, std::size_t num_patches);

struct TeacherSample {
  const Tensor* image;   // [3 x H x W]
  const Tensor* target;  // [N x d]
};

struct FinetuneOptions {
  std::size_t steps = 500;
  std::size_t batch_size = 8;
  double learning_rate = 5e-4;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
};

struct FinetuneResult {
  EncoderParams encoder;       // frozen
  std::vector<double> losses;  // batch l1 loss per step
};

/// Minimizes the mean absolute error between the encoder's final-block
/// (post-norm) tokens and the rendered targets with Adam. The returned
/// encoder is frozen.
FinetuneResult fit3d_finetune(EncoderParams encoder, std::span<const TeacherSample> dataset,
                              const FinetuneOptions& options);

// Mean l1 between final-block tokens and targets over the given samples.
double l1_to_targets(const EncoderParams& encoder, std::span<const TeacherSample> samples);

/// Patch pairs that see the same visible target voxel from both cameras,
/// as (patch in a, patch in b), one entry per such voxel.
std::vector<std::pair<std::size_t, std::size_t>> target_correspondences(const SceneSpec& scene,
                                                                        const CameraSpec& a, const CameraSpec& b,
                                                                        std::size_t grid);

/// Mean cosine similarity of final-block tokens at corresponding target
/// patches of the two views.
double consistency_score(const EncoderParams& encoder, const SceneSpec& scene, const CameraSpec& a,
                         const CameraSpec& b);

}  // namespace vega
