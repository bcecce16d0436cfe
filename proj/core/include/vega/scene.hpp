#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vega/policy_head.hpp"
#include "vega/tensor.hpp"

namespace vega {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  bool operator==(const Vec3&) const = default;
};

double dot(const Vec3& a, const Vec3& b);
Vec3 cross(const Vec3& a, const Vec3& b);
double norm(const Vec3& a);
Vec3 normalized(const Vec3& a);

struct Rgb {
  double r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

enum class Difficulty { easy, hard };
std::string to_string(Difficulty d);
Difficulty parse_difficulty(const std::string& s);

/// Pinhole camera. Focal length is in pixels; the image is square.
struct CameraSpec {
  Vec3 position;
  Vec3 look_at;
  double focal = 0;
  std::size_t resolution = 32;

  // Rejects zero/negative focal length, coincident position and target, and a
  // view direction parallel to the world up axis.
  void validate() const;
  bool operator==(const CameraSpec&) const = default;
};

/// Voxel occupancy on an extent^3 grid. Voxel (x, y, z) spans [x, x+1) etc.;
/// y is up and z points away from the front camera.
struct OccupancyGrid {
  std::size_t extent = 16;
  std::vector<std::int16_t> object;  // owning object index per voxel, -1 when empty

  static OccupancyGrid empty(std::size_t extent);
  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const { return (z * extent + y) * extent + x; }
  bool occupied(std::size_t i) const { return object[i] >= 0; }
  Vec3 center(std::size_t i) const;
  std::size_t occupied_count() const;
};

struct VoxelObject {
  // 0 for the target, 1.. for distractor palette entries.
  int color_class = 0;
  Rgb color;
  std::array<int, 3> lo{};  // inclusive
  std::array<int, 3> hi{};  // exclusive
};

struct SceneSpec {
  OccupancyGrid grid;
  std::vector<Rgb> voxel_color;      // per voxel; black where empty
  std::vector<VoxelObject> objects;  // objects[0] is the target
  Rgb background;
  std::vector<CameraSpec> cameras;
  std::uint64_t seed = 0;
  Difficulty difficulty = Difficulty::easy;

  std::size_t distractor_count() const { return objects.empty() ? 0 : objects.size() - 1; }
  Vec3 target_centroid() const;
  std::vector<std::size_t> target_voxels() const;
  // Exactly one target inside the grid.
  void validate() const;
};

inline constexpr std::size_t kSceneExtent = 16;
inline constexpr std::size_t kImageSize = 32;

// Scene with no objects and the default cameras; used for building test fixtures.
SceneSpec empty_scene(std::size_t extent = kSceneExtent);
// Fills an axis-aligned box and appends it to the object list.
void add_box(SceneSpec& scene, const VoxelObject& object);

/// Front and oblique cameras looking at the grid centre. `height_offset`
/// raises both cameras (hard-split jitter).
std::vector<CameraSpec> default_cameras(double height_offset = 0.0, std::size_t resolution = kImageSize);

/// Deterministic in (seed, difficulty). Easy: 0-1 distractors, fixed
/// background and camera height. Hard: 2-4 distractors, random background,
/// camera height jitter.
SceneSpec generate_scene(std::uint64_t seed, Difficulty difficulty);

/// (target centroid / extent, grasp = 1).
Action ground_truth_action(const SceneSpec& scene);

// --- projection shared by the RGB and feature renderers ------------------

struct PixelHit {
  int voxel = -1;     // -1 on a miss
  int face_axis = 0;  // axis of the entered face
  int face_sign = 0;  // +1 when the face normal points along +axis
  double depth = 0;   // distance along the ray
};

/// Nearest occupied voxel along each pixel ray (a voxel z-buffer), row-major.
std::vector<PixelHit> cast_rays(const OccupancyGrid& grid, const CameraSpec& camera);

// Pixel coordinates of a world point, or nullopt when it lies behind the camera.
std::optional<std::array<double, 2>> project_point(const CameraSpec& camera, const Vec3& point);

/// [3 x H x W] render with per-face shading; background colour on misses.
Tensor render_rgb(const SceneSpec& scene, const CameraSpec& camera);

}  // namespace vega
