#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vega/policy_head.hpp"
#include "vega/scene.hpp"
#include "vega/tensor.hpp"

namespace vega {

inline constexpr const char* kDatasetVersion = "vega-dataset/1";

struct DatasetEntry {
  std::size_t scene_id = 0;
  std::uint64_t scene_seed = 0;
  std::vector<std::size_t> camera_ids;
  std::vector<std::string> images;   // relative to the dataset root
  std::vector<std::string> targets;  // relative to the dataset root
  Action action;

  bool operator==(const DatasetEntry&) const = default;
};

struct DatasetManifest {
  std::string version = kDatasetVersion;
  std::uint64_t global_seed = 0;
  std::uint64_t feature_seed = 0;
  Difficulty difficulty = Difficulty::easy;
  std::size_t feature_dim = 32;
  std::size_t patch_grid = 4;
  std::size_t image_size = kImageSize;
  std::vector<DatasetEntry> entries;

  bool operator==(const DatasetManifest&) const = default;
};

/// A loaded split. Views are stored scene-major: view index = scene * cameras + camera.
struct Dataset {
  DatasetManifest manifest;
  std::vector<Tensor> images;   // [3 x H x W], values on the 8-bit grid
  std::vector<Tensor> targets;  // [N x feature_dim], f32-rounded
  Tensor actions;               // [scenes x kActionDim]

  std::size_t num_scenes() const { return manifest.entries.size(); }
  std::size_t views_per_scene() const;
  std::size_t num_views() const { return images.size(); }
  std::size_t scene_of_view(std::size_t view) const { return view / views_per_scene(); }
  Action action(std::size_t scene) const;
  // Regenerates the scene geometry from its recorded seed.
  SceneSpec scene(std::size_t scene) const;
};

struct SplitOptions {
  std::uint64_t global_seed = 0;
  std::uint64_t split = 0;  // distinct splits draw disjoint scene seeds
  std::size_t num_scenes = 512;
  Difficulty difficulty = Difficulty::easy;
  std::size_t feature_dim = 32;
  std::size_t patch_grid = 4;
};

std::uint64_t scene_seed(std::uint64_t global_seed, std::uint64_t split, std::size_t index);
std::uint64_t feature_seed(std::uint64_t global_seed);

std::vector<SceneSpec> generate_scenes(const SplitOptions& options);

/// Renders every camera of every scene and writes the split layout:
///   manifest.json, images/scene{i}_cam{j}.ppm, targets/scene{i}_cam{j}.vegt, actions.vegt
void write_dataset(const std::filesystem::path& root, const std::vector<SceneSpec>& scenes,
                   const SplitOptions& options);
// Writes an in-memory split back out in the same layout.
void save_dataset(const std::filesystem::path& root, const Dataset& dataset);

/// Rejects, each with its own diagnostic: malformed manifest, missing or
/// truncated files, and a version other than kDatasetVersion.
Dataset load_dataset(const std::filesystem::path& root);

// Standard split directory names written by `gen-data`.
inline constexpr const char* kTrainSplit = "train";
inline constexpr const char* kEvalEasySplit = "eval_easy";
inline constexpr const char* kEvalHardSplit = "eval_hard";

}  // namespace vega
