#include "vega/dataset.hpp"

#include <json.hpp>

#include "vega/error.hpp"
#include "vega/fit3d.hpp"
#include "vega/rng.hpp"
#include "vega/tensor_io.hpp"

namespace vega {

using nlohmann::json;

std::size_t Dataset::views_per_scene() const {
  if (manifest.entries.empty()) return 1;
  return manifest.entries.front().camera_ids.size();
}

Action Dataset::action(std::size_t scene) const {
  const std::size_t a = actions.cols();
  const auto row = actions.values().subspan(scene * a, a);
  return Action(row.begin(), row.end());
}

SceneSpec Dataset::scene(std::size_t scene) const {
  return generate_scene(manifest.entries.at(scene).scene_seed, manifest.difficulty);
}

std::uint64_t scene_seed(std::uint64_t global_seed, std::uint64_t split, std::size_t index) {
  return derive_seed(derive_seed(global_seed, 1000 + split), index);
}

std::uint64_t feature_seed(std::uint64_t global_seed) { return derive_seed(global_seed, 99); }

std::vector<SceneSpec> generate_scenes(const SplitOptions& options) {
  std::vector<SceneSpec> scenes;
  scenes.reserve(options.num_scenes);
  for (std::size_t i = 0; i < options.num_scenes; ++i) {
    scenes.push_back(generate_scene(scene_seed(options.global_seed, options.split, i), options.difficulty));
  }
  return scenes;
}

namespace {

std::string view_name(std::size_t scene, std::size_t cam) {
  return "scene" + std::to_string(scene) + "_cam" + std::to_string(cam);
}

json manifest_to_json(const DatasetManifest& m) {
  json scenes = json::array();
  for (const auto& e : m.entries) {
    scenes.push_back({{"scene_id", e.scene_id},
                      {"scene_seed", e.scene_seed},
                      {"camera_ids", e.camera_ids},
                      {"images", e.images},
                      {"targets", e.targets},
                      {"action", e.action}});
  }
  return {{"version", m.version},
          {"global_seed", m.global_seed},
          {"feature_seed", m.feature_seed},
          {"difficulty", to_string(m.difficulty)},
          {"config", {{"feature_dim", m.feature_dim}, {"patch_grid", m.patch_grid}, {"image_size", m.image_size}}},
          {"scenes", scenes}};
}

DatasetManifest manifest_from_json(const json& j, const std::string& path) {
  DatasetManifest m;
  try {
    m.version = j.at("version").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError("malformed manifest " + path + ": " + e.what());
  }
  if (m.version != kDatasetVersion) {
    throw ValidationError("dataset version mismatch in " + path + ": expected '" + kDatasetVersion + "', found '" +
                          m.version + "'");
  }
  try {
    m.global_seed = j.at("global_seed").get<std::uint64_t>();
    m.feature_seed = j.at("feature_seed").get<std::uint64_t>();
    m.difficulty = parse_difficulty(j.at("difficulty").get<std::string>());
    const auto& cfg = j.at("config");
    m.feature_dim = cfg.at("feature_dim").get<std::size_t>();
    m.patch_grid = cfg.at("patch_grid").get<std::size_t>();
    m.image_size = cfg.at("image_size").get<std::size_t>();
    for (const auto& s : j.at("scenes")) {
      DatasetEntry e;
      e.scene_id = s.at("scene_id").get<std::size_t>();
      e.scene_seed = s.at("scene_seed").get<std::uint64_t>();
      e.camera_ids = s.at("camera_ids").get<std::vector<std::size_t>>();
      e.images = s.at("images").get<std::vector<std::string>>();
      e.targets = s.at("targets").get<std::vector<std::string>>();
      e.action = s.at("action").get<std::vector<double>>();
      if (e.images.size() != e.camera_ids.size() || e.targets.size() != e.camera_ids.size() ||
          e.action.size() != kActionDim) {
        throw ValidationError("malformed manifest " + path + ": inconsistent entry for scene " +
                              std::to_string(e.scene_id));
      }
      m.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw ValidationError("malformed manifest " + path + ": " + e.what());
  }
  if (m.entries.empty()) throw ValidationError("malformed manifest " + path + ": no scenes");
  const std::size_t views = m.entries.front().camera_ids.size();
  for (const auto& e : m.entries) {
    if (e.camera_ids.size() != views || views == 0) {
      throw ValidationError("malformed manifest " + path + ": scenes disagree on camera count");
    }
  }
  return m;
}

void write_layout(const std::filesystem::path& root, const DatasetManifest& manifest,
                  const std::vector<Tensor>& images, const std::vector<Tensor>& targets, const Tensor& actions) {
  std::filesystem::create_directories(root / "images");
  std::filesystem::create_directories(root / "targets");
  std::size_t view = 0;
  for (const auto& e : manifest.entries) {
    for (std::size_t c = 0; c < e.camera_ids.size(); ++c, ++view) {
      io::write_ppm(root / e.images[c], images[view]);
      io::write_tensor(root / e.targets[c], targets[view], io::Precision::f32);
    }
  }
  io::write_tensor(root / "actions.vegt", actions, io::Precision::f32);
  io::write_file(root / "manifest.json", manifest_to_json(manifest).dump(1) + "\n");
}

double f32_round(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

void write_dataset(const std::filesystem::path& root, const std::vector<SceneSpec>& scenes,
                   const SplitOptions& options) {
  if (scenes.empty()) throw ValidationError("write_dataset: no scenes");
  DatasetManifest m;
  m.global_seed = options.global_seed;
  m.feature_seed = feature_seed(options.global_seed);
  m.difficulty = options.difficulty;
  m.feature_dim = options.feature_dim;
  m.patch_grid = options.patch_grid;
  m.image_size = scenes.front().cameras.front().resolution;

  std::vector<Tensor> images, targets;
  Tensor actions({scenes.size(), kActionDim});
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const SceneSpec& s = scenes[i];
    s.validate();
    DatasetEntry e;
    e.scene_id = i;
    e.scene_seed = s.seed;
    const FeatureField field = build_feature_field(s, m.feature_seed, m.feature_dim);
    for (std::size_t c = 0; c < s.cameras.size(); ++c) {
      e.camera_ids.push_back(c);
      e.images.push_back("images/" + view_name(i, c) + ".ppm");
      e.targets.push_back("targets/" + view_name(i, c) + ".vegt");
      images.push_back(render_rgb(s, s.cameras[c]));
      targets.push_back(render_feature_map(field, s.cameras[c], m.patch_grid * m.patch_grid).features);
    }
    const Action a = ground_truth_action(s);
    for (std::size_t k = 0; k < kActionDim; ++k) {
      actions[i * kActionDim + k] = a[k];
      e.action.push_back(f32_round(a[k]));
    }
    m.entries.push_back(std::move(e));
  }
  write_layout(root, m, images, targets, actions);
}

void save_dataset(const std::filesystem::path& root, const Dataset& dataset) {
  write_layout(root, dataset.manifest, dataset.images, dataset.targets, dataset.actions);
}

Dataset load_dataset(const std::filesystem::path& root) {
  const auto manifest_path = root / "manifest.json";
  const std::string text = io::read_file(manifest_path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  Dataset ds;
  ds.manifest = manifest_from_json(j, manifest_path.string());
  const std::size_t n = ds.manifest.patch_grid * ds.manifest.patch_grid;
  for (const auto& e : ds.manifest.entries) {
    for (std::size_t c = 0; c < e.camera_ids.size(); ++c) {
      Tensor img = io::read_ppm(root / e.images[c]);
      if (img.dim(1) != ds.manifest.image_size || img.dim(2) != ds.manifest.image_size) {
        throw ValidationError((root / e.images[c]).string() + ": image size disagrees with manifest");
      }
      ds.images.push_back(std::move(img));
      Tensor tgt = io::read_tensor(root / e.targets[c]);
      if (tgt.rank() != 2 || tgt.dim(0) != n || tgt.dim(1) != ds.manifest.feature_dim) {
        throw ValidationError((root / e.targets[c]).string() + ": target shape " + shape_string(tgt.shape()) +
                              " disagrees with manifest");
      }
      ds.targets.push_back(std::move(tgt));
    }
  }
  ds.actions = io::read_tensor(root / "actions.vegt");
  const auto actions_path = (root / "actions.vegt").string();
  if (ds.actions.rank() != 2 || ds.actions.dim(0) != ds.num_scenes() || ds.actions.dim(1) != kActionDim) {
    throw ValidationError(actions_path + ": shape " + shape_string(ds.actions.shape()) + " disagrees with manifest");
  }
  for (std::size_t i = 0; i < ds.num_scenes(); ++i) {
    if (ds.action(i) != ds.manifest.entries[i].action) {
      throw ValidationError(actions_path + ": action of scene " + std::to_string(i) + " disagrees with manifest");
    }
  }
  return ds;
}

}  // namespace vega
