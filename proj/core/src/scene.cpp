#include "vega/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vega/error.hpp"
#include "vega/rng.hpp"

namespace vega {

double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
Vec3 normalized(const Vec3& a) { return a * (1.0 / norm(a)); }

std::string to_string(Difficulty d) { return d == Difficulty::easy ? "easy" : "hard"; }

Difficulty parse_difficulty(const std::string& s) {
  if (s == "easy") return Difficulty::easy;
  if (s == "hard") return Difficulty::hard;
  throw ValidationError("unknown difficulty '" + s + "'");
}

void CameraSpec::validate() const {
  if (!(focal > 0.0) || !std::isfinite(focal)) throw ValidationError("degenerate camera: focal length must be positive");
  if (resolution == 0) throw ValidationError("degenerate camera: zero resolution");
  const Vec3 f = look_at - position;
  if (norm(f) == 0.0) throw ValidationError("degenerate camera: position equals look-at point");
  if (norm(cross(normalized(f), {0, 1, 0})) < 1e-9) {
    throw ValidationError("degenerate camera: view direction parallel to the up axis");
  }
}

OccupancyGrid OccupancyGrid::empty(std::size_t extent) {
  OccupancyGrid g;
  g.extent = extent;
  g.object.assign(extent * extent * extent, -1);
  return g;
}

Vec3 OccupancyGrid::center(std::size_t i) const {
  const std::size_t x = i % extent, y = (i / extent) % extent, z = i / (extent * extent);
  return {x + 0.5, y + 0.5, z + 0.5};
}

std::size_t OccupancyGrid::occupied_count() const {
  return static_cast<std::size_t>(std::count_if(object.begin(), object.end(), [](auto o) { return o >= 0; }));
}

std::vector<std::size_t> SceneSpec::target_voxels() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < grid.object.size(); ++i)
    if (grid.object[i] == 0) out.push_back(i);
  return out;
}

Vec3 SceneSpec::target_centroid() const {
  const auto voxels = target_voxels();
  if (voxels.empty()) throw ValidationError("scene has no target object");
  Vec3 c;
  for (std::size_t i : voxels) c = c + grid.center(i);
  return c * (1.0 / static_cast<double>(voxels.size()));
}

void SceneSpec::validate() const {
  if (objects.empty() || objects[0].color_class != 0) throw ValidationError("scene must have a target object first");
  for (std::size_t i = 1; i < objects.size(); ++i) {
    if (objects[i].color_class == 0) throw ValidationError("scene has more than one target object");
  }
  const Vec3 c = target_centroid();
  const double e = static_cast<double>(grid.extent);
  if (c.x <= 0 || c.y <= 0 || c.z <= 0 || c.x >= e || c.y >= e || c.z >= e) {
    throw ValidationError("target centroid lies outside the grid");
  }
}

std::vector<CameraSpec> default_cameras(double height_offset, std::size_t resolution) {
  const double mid = kSceneExtent / 2.0;
  const Vec3 centre{mid, mid, mid};
  const double scale = static_cast<double>(resolution) / static_cast<double>(kImageSize);
  CameraSpec front{{mid, mid + height_offset, mid - 32.0}, centre, 38.0 * scale, resolution};
  CameraSpec oblique{{mid + 20.0, mid + 14.0 + height_offset, mid - 14.0}, centre, 30.0 * scale, resolution};
  return {front, oblique};
}

SceneSpec empty_scene(std::size_t extent) {
  SceneSpec s;
  s.grid = OccupancyGrid::empty(extent);
  s.voxel_color.assign(s.grid.object.size(), Rgb{});
  s.background = {0.35, 0.35, 0.4};
  s.cameras = default_cameras();
  return s;
}

void add_box(SceneSpec& scene, const VoxelObject& object) {
  const auto e = static_cast<int>(scene.grid.extent);
  for (int a = 0; a < 3; ++a) {
    if (object.lo[a] < 0 || object.hi[a] > e || object.lo[a] >= object.hi[a]) {
      throw ValidationError("box outside the scene grid");
    }
  }
  const auto id = static_cast<std::int16_t>(scene.objects.size());
  for (int z = object.lo[2]; z < object.hi[2]; ++z)
    for (int y = object.lo[1]; y < object.hi[1]; ++y)
      for (int x = object.lo[0]; x < object.hi[0]; ++x) {
        const std::size_t i = scene.grid.index(x, y, z);
        scene.grid.object[i] = id;
        scene.voxel_color[i] = object.color;
      }
  scene.objects.push_back(object);
}

namespace {

constexpr Rgb kTargetColor{0.85, 0.15, 0.10};
constexpr std::array<Rgb, 5> kDistractorPalette{{
    {0.20, 0.70, 0.20},
    {0.20, 0.30, 0.85},
    {0.90, 0.85, 0.20},
    {0.20, 0.80, 0.80},
    {0.75, 0.25, 0.75},
}};

bool boxes_conflict(const VoxelObject& a, const VoxelObject& b) {
  // One empty voxel of clearance on every axis.
  for (int ax = 0; ax < 3; ++ax) {
    if (a.hi[ax] + 1 <= b.lo[ax] || b.hi[ax] + 1 <= a.lo[ax]) return false;
  }
  return true;
}

VoxelObject random_box(Rng& rng, int color_class, Rgb color, int extent) {
  VoxelObject o;
  o.color_class = color_class;
  o.color = color;
  for (int ax = 0; ax < 3; ++ax) {
    const int size = 2 + static_cast<int>(rng.below(2));
    const int lo_min = 1, lo_max = extent - 1 - size;
    o.lo[ax] = lo_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(lo_max - lo_min + 1)));
    o.hi[ax] = o.lo[ax] + size;
  }
  return o;
}

}  // namespace

SceneSpec generate_scene(std::uint64_t seed, Difficulty difficulty) {
  Rng rng(derive_seed(seed, difficulty == Difficulty::easy ? 11 : 12));
  SceneSpec scene = empty_scene(kSceneExtent);
  scene.seed = seed;
  scene.difficulty = difficulty;
  const int extent = static_cast<int>(kSceneExtent);

  add_box(scene, random_box(rng, 0, kTargetColor, extent));

  const std::size_t distractors =
      difficulty == Difficulty::easy ? rng.below(2) : 2 + rng.below(3);
  for (std::size_t k = 0; k < distractors; ++k) {
    const auto palette = rng.below(kDistractorPalette.size());
    for (int attempt = 0; attempt < 200; ++attempt) {
      VoxelObject cand = random_box(rng, static_cast<int>(palette) + 1, kDistractorPalette[palette], extent);
      const bool clash = std::any_of(scene.objects.begin(), scene.objects.end(),
                                     [&](const VoxelObject& o) { return boxes_conflict(o, cand); });
      if (!clash) {
        add_box(scene, cand);
        break;
      }
    }
  }

  double height = 0.0;
  if (difficulty == Difficulty::hard) {
    scene.background = {rng.uniform(0.05, 0.6), rng.uniform(0.05, 0.6), rng.uniform(0.05, 0.6)};
    do {
      height = rng.uniform(-3.0, 3.0);
    } while (height == 0.0);
  }
  scene.cameras = default_cameras(height);
  return scene;
}

Action ground_truth_action(const SceneSpec& scene) {
  const Vec3 c = scene.target_centroid();
  const double e = static_cast<double>(scene.grid.extent);
  return {c.x / e, c.y / e, c.z / e, 1.0};
}

// ---------------------------------------------------------------------------
// Ray casting

namespace {

struct Basis {
  Vec3 forward, right, up;
};

Basis camera_basis(const CameraSpec& cam) {
  Basis b;
  b.forward = normalized(cam.look_at - cam.position);
  b.right = normalized(cross(b.forward, {0, 1, 0}));
  b.up = cross(b.right, b.forward);
  return b;
}

// Amanatides-Woo traversal of the grid; returns the first occupied voxel.
PixelHit trace(const OccupancyGrid& grid, const Vec3& origin, const Vec3& dir) {
  PixelHit hit;
  const double e = static_cast<double>(grid.extent);
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  int entry_axis = -1;
  for (int a = 0; a < 3; ++a) {
    const double o = origin[a], d = dir[a];
    if (d == 0.0) {
      if (o < 0.0 || o >= e) return hit;
      continue;
    }
    double ta = (0.0 - o) / d, tb = (e - o) / d;
    if (ta > tb) std::swap(ta, tb);
    if (ta > t0) {
      t0 = ta;
      entry_axis = a;
    }
    t1 = std::min(t1, tb);
  }
  if (t0 > t1) return hit;

  const Vec3 p = origin + dir * t0;
  std::array<int, 3> cell{};
  std::array<int, 3> step{};
  std::array<double, 3> t_max{}, t_delta{};
  for (int a = 0; a < 3; ++a) {
    cell[a] = std::clamp(static_cast<int>(std::floor(p[a])), 0, static_cast<int>(grid.extent) - 1);
    const double d = dir[a];
    if (d > 0) {
      step[a] = 1;
      t_max[a] = (cell[a] + 1 - origin[a]) / d;
      t_delta[a] = 1.0 / d;
    } else if (d < 0) {
      step[a] = -1;
      t_max[a] = (cell[a] - origin[a]) / d;
      t_delta[a] = -1.0 / d;
    } else {
      step[a] = 0;
      t_max[a] = std::numeric_limits<double>::infinity();
      t_delta[a] = std::numeric_limits<double>::infinity();
    }
  }
  int axis = entry_axis < 0 ? 2 : entry_axis;
  double t = t0;
  const int n = static_cast<int>(grid.extent);
  while (true) {
    const std::size_t idx = grid.index(cell[0], cell[1], cell[2]);
    if (grid.occupied(idx)) {
      hit.voxel = static_cast<int>(idx);
      hit.face_axis = axis;
      hit.face_sign = dir[axis] > 0 ? -1 : 1;
      hit.depth = t;
      return hit;
    }
    axis = 0;
    if (t_max[1] < t_max[axis]) axis = 1;
    if (t_max[2] < t_max[axis]) axis = 2;
    t = t_max[axis];
    cell[axis] += step[axis];
    if (cell[axis] < 0 || cell[axis] >= n) return hit;
    t_max[axis] += t_delta[axis];
  }
}

}  // namespace

std::vector<PixelHit> cast_rays(const OccupancyGrid& grid, const CameraSpec& camera) {
  camera.validate();
  const Basis b = camera_basis(camera);
  const std::size_t res = camera.resolution;
  const double half = static_cast<double>(res) / 2.0;
  std::vector<PixelHit> hits(res * res);
  for (std::size_t v = 0; v < res; ++v) {
    for (std::size_t u = 0; u < res; ++u) {
      const double px = u + 0.5 - half, py = v + 0.5 - half;
      const Vec3 dir = normalized(b.forward * camera.focal + b.right * px - b.up * py);
      hits[v * res + u] = trace(grid, camera.position, dir);
    }
  }
  return hits;
}

std::optional<std::array<double, 2>> project_point(const CameraSpec& camera, const Vec3& point) {
  camera.validate();
  const Basis b = camera_basis(camera);
  const Vec3 rel = point - camera.position;
  const double zc = dot(rel, b.forward);
  if (zc <= 0.0) return std::nullopt;
  const double half = static_cast<double>(camera.resolution) / 2.0;
  return std::array<double, 2>{half + camera.focal * dot(rel, b.right) / zc, half - camera.focal * dot(rel, b.up) / zc};
}

Tensor render_rgb(const SceneSpec& scene, const CameraSpec& camera) {
  const auto hits = cast_rays(scene.grid, camera);
  const std::size_t res = camera.resolution;
  Tensor image({3, res, res});
  for (std::size_t p = 0; p < hits.size(); ++p) {
    Rgb c = scene.background;
    if (hits[p].voxel >= 0) {
      const Rgb base = scene.voxel_color[static_cast<std::size_t>(hits[p].voxel)];
      double shade = 0.7;
      if (hits[p].face_axis == 1 && hits[p].face_sign > 0) shade = 1.0;  // top
      else if (hits[p].face_axis == 2 && hits[p].face_sign < 0) shade = 0.9;  // front
      else if (hits[p].face_axis == 0) shade = 0.8;  // sides
      c = {base.r * shade, base.g * shade, base.b * shade};
    }
    image[0 * res * res + p] = c.r;
    image[1 * res * res + p] = c.g;
    image[2 * res * res + p] = c.b;
  }
  return image;
}

}  // namespace vega
