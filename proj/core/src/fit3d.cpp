#include "vega/fit3d.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "vega/error.hpp"
#include "vega/optim.hpp"
#include "vega/rng.hpp"
#include "vega/tensor_io.hpp"

namespace vega {

namespace {

constexpr std::size_t kPositionCode = 9;
constexpr double kPositionWeight = 1.5;

// Smooth code of a point in [-1, 1]^3: linear terms plus one sine and cosine octave.
std::array<double, kPositionCode> position_code(const Vec3& p) {
  const double pi = std::numbers::pi;
  return {p.x, p.y, p.z, std::sin(pi * p.x), std::sin(pi * p.y), std::sin(pi * p.z),
          std::cos(pi * p.x), std::cos(pi * p.y), std::cos(pi * p.z)};
}

std::vector<double> unit_gaussian(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double n2 = 0.0;
  for (double& x : v) {
    x = rng.normal();
    n2 += x * x;
  }
  const double inv = 1.0 / std::sqrt(n2);
  for (double& x : v) x *= inv;
  return v;
}

}  // namespace

Tensor background_feature(std::size_t dim) {
  Tensor e({dim});
  e[0] = 1.0;
  return e;
}

FeatureField build_feature_field(const SceneSpec& scene, std::uint64_t seed, std::size_t dim) {
  if (dim == 0) throw ValidationError("feature field: dimension must be positive");
  // Per colour class: one unit vector and one position mixing matrix, all from the field seed.
  int max_class = 0;
  for (const auto& o : scene.objects) max_class = std::max(max_class, o.color_class);
  std::vector<std::vector<double>> class_vec, class_mix;
  for (int c = 0; c <= max_class; ++c) {
    Rng r(derive_seed(seed, 100 + static_cast<std::uint64_t>(c)));
    class_vec.push_back(unit_gaussian(r, dim));
    std::vector<double> mix(dim * kPositionCode);
    for (double& v : mix) v = r.normal() / std::sqrt(static_cast<double>(kPositionCode));
    class_mix.push_back(std::move(mix));
  }

  FeatureField field;
  field.grid = scene.grid;
  field.dim = dim;
  field.features = Tensor({scene.grid.object.size(), dim});
  const double e = static_cast<double>(scene.grid.extent);
  for (std::size_t i = 0; i < scene.grid.object.size(); ++i) {
    if (!scene.grid.occupied(i)) continue;
    const Vec3 c = scene.grid.center(i);
    const auto code = position_code({2.0 * c.x / e - 1.0, 2.0 * c.y / e - 1.0, 2.0 * c.z / e - 1.0});
    const auto c_id = static_cast<std::size_t>(scene.objects[scene.grid.object[i]].color_class);
    const auto& cls = class_vec[c_id];
    const auto& mix = class_mix[c_id];
    double* f = field.features.values().data() + i * dim;
    double n2 = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      double v = cls[j];
      for (std::size_t k = 0; k < kPositionCode; ++k) v += kPositionWeight * mix[j * kPositionCode + k] * code[k];
      f[j] = v;
      n2 += v * v;
    }
    const double inv = 1.0 / std::sqrt(n2);
    for (std::size_t j = 0; j < dim; ++j) f[j] *= inv;
  }
  return field;
}

namespace {
std::size_t square_grid(std::size_t num_patches) {
  const auto g = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(num_patches))));
  if (g == 0 || g * g != num_patches) {
    throw ValidationError("patch count " + std::to_string(num_patches) + " is not a perfect square");
  }
  return g;
}

std::size_t patch_of_pixel(std::size_t u, std::size_t v, std::size_t res, std::size_t g) {
  const std::size_t ps = res / g;
  return (v / ps) * g + (u / ps);
}
}  // namespace

RenderedFeatureMap render_feature_map(const FeatureField& field, const CameraSpec& camera, std::size_t num_patches) {
  const std::size_t g = square_grid(num_patches);
  if (camera.resolution % g != 0) throw ValidationError("camera resolution is not divisible by the patch grid");
  const auto hits = cast_rays(field.grid, camera);
  const std::size_t res = camera.resolution, d = field.dim;

  RenderedFeatureMap out;
  out.features = Tensor({num_patches, d});
  out.hit.assign(num_patches, false);
  std::vector<std::size_t> counts(num_patches, 0);
  for (std::size_t v = 0; v < res; ++v)
    for (std::size_t u = 0; u < res; ++u) {
      const PixelHit& h = hits[v * res + u];
      if (h.voxel < 0) continue;
      const std::size_t p = patch_of_pixel(u, v, res, g);
      const double* f = field.features.values().data() + static_cast<std::size_t>(h.voxel) * d;
      for (std::size_t j = 0; j < d; ++j) out.features[p * d + j] += f[j];
      ++counts[p];
    }
  const Tensor bg = background_feature(d);
  for (std::size_t p = 0; p < num_patches; ++p) {
    if (counts[p] == 0) {
      for (std::size_t j = 0; j < d; ++j) out.features[p * d + j] = bg[j];
      continue;
    }
    out.hit[p] = true;
    const double inv = 1.0 / static_cast<double>(counts[p]);
    for (std::size_t j = 0; j < d; ++j) out.features[p * d + j] *= inv;
  }
  return out;
}

namespace {

ad::Var final_tokens(ad::Tape& tape, EncoderParams& encoder, std::span<const Tensor* const> images) {
  ad::Var patches = tape.constant(patchify_batch(images, encoder.config));
  return encode_on_tape(tape, encoder, patches, encoder.config.num_blocks).back();
}

Tensor stack_targets(std::span<const Tensor* const> targets) {
  const std::size_t n = targets[0]->rows(), d = targets[0]->cols();
  Tensor out({targets.size() * n, d});
  for (std::size_t b = 0; b < targets.size(); ++b) {
    if (targets[b]->size() != n * d) throw ValidationError("teacher targets have inconsistent shapes");
    std::copy(targets[b]->values().begin(), targets[b]->values().end(), out.values().begin() + b * n * d);
  }
  return out;
}

}  // namespace

double l1_to_targets(const EncoderParams& encoder, std::span<const TeacherSample> samples) {
  if (samples.empty()) throw ValidationError("l1_to_targets: no samples");
  auto& enc = const_cast<EncoderParams&>(encoder);
  double total = 0.0;
  for (const auto& s : samples) {
    ad::Tape tape(false);
    const Tensor* img[] = {s.image};
    const Tensor* tgt[] = {s.target};
    total += ad::l1(final_tokens(tape, enc, img), tape.constant(stack_targets(tgt))).value().item();
  }
  return total / static_cast<double>(samples.size());
}

FinetuneResult fit3d_finetune(EncoderParams encoder, std::span<const TeacherSample> dataset,
                              const FinetuneOptions& options) {
  if (dataset.empty()) throw ValidationError("fit3d_finetune: empty dataset");
  if (options.batch_size == 0) throw ValidationError("fit3d_finetune: batch size must be positive");
  const std::size_t n = encoder.config.num_tokens(), d = encoder.config.embed_dim;
  for (const auto& s : dataset) {
    if (s.target->rows() != n || s.target->cols() != d) {
      throw ValidationError("fit3d_finetune: target shape " + shape_string(s.target->shape()) +
                            " does not match encoder tokens [" + std::to_string(n) + "x" + std::to_string(d) + "]");
    }
  }

  encoder.unfreeze();
  Adam adam(encoder.named());
  Rng rng(derive_seed(options.seed, 7));
  FinetuneResult result;
  result.losses.reserve(options.steps);
  std::vector<const Tensor*> images(options.batch_size), targets(options.batch_size);
  for (std::size_t step = 0; step < options.steps; ++step) {
    for (std::size_t b = 0; b < options.batch_size; ++b) {
      const auto& s = dataset[rng.below(dataset.size())];
      images[b] = s.image;
      targets[b] = s.target;
    }
    adam.zero_grad();
    ad::Tape tape;
    ad::Var loss = ad::l1(final_tokens(tape, encoder, images), tape.constant(stack_targets(targets)));
    const double value = loss.value().item();
    if (!std::isfinite(value)) throw RuntimeFailure("fit3d_finetune: non-finite loss at step " + std::to_string(step));
    result.losses.push_back(value);
    tape.backward(loss);
    clip_grad_norm(adam.params(), options.clip_norm);
    adam.step(options.learning_rate);
  }
  encoder.freeze();
  result.encoder = std::move(encoder);
  return result;
}

std::vector<std::pair<std::size_t, std::size_t>> target_correspondences(const SceneSpec& scene,
                                                                        const CameraSpec& a, const CameraSpec& b,
                                                                        std::size_t grid) {
  const auto hits_a = cast_rays(scene.grid, a);
  const auto hits_b = cast_rays(scene.grid, b);
  std::vector<bool> seen_a(scene.grid.object.size(), false), seen_b(scene.grid.object.size(), false);
  for (const auto& h : hits_a)
    if (h.voxel >= 0) seen_a[static_cast<std::size_t>(h.voxel)] = true;
  for (const auto& h : hits_b)
    if (h.voxel >= 0) seen_b[static_cast<std::size_t>(h.voxel)] = true;

  auto patch_for = [grid](const CameraSpec& cam, const Vec3& p) -> std::optional<std::size_t> {
    const auto uv = project_point(cam, p);
    if (!uv) return std::nullopt;
    const double res = static_cast<double>(cam.resolution);
    if ((*uv)[0] < 0 || (*uv)[1] < 0 || (*uv)[0] >= res || (*uv)[1] >= res) return std::nullopt;
    return patch_of_pixel(static_cast<std::size_t>((*uv)[0]), static_cast<std::size_t>((*uv)[1]), cam.resolution,
                          grid);
  };

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t v : scene.target_voxels()) {
    if (!seen_a[v] || !seen_b[v]) continue;
    const Vec3 c = scene.grid.center(v);
    const auto pa = patch_for(a, c), pb = patch_for(b, c);
    if (pa && pb) pairs.emplace_back(*pa, *pb);
  }
  return pairs;
}

double consistency_score(const EncoderParams& encoder, const SceneSpec& scene, const CameraSpec& a,
                         const CameraSpec& b) {
  const auto pairs = target_correspondences(scene, a, b, encoder.config.grid());
  if (pairs.empty()) throw ValidationError("consistency_score: the cameras share no visible target voxel");
  const auto ta = encode(io::quantize_8bit(render_rgb(scene, a)), encoder).back().tokens;
  const auto tb = encode(io::quantize_8bit(render_rgb(scene, b)), encoder).back().tokens;
  const std::size_t d = ta.cols();
  double total = 0.0;
  for (const auto& [pa, pb] : pairs) {
    double xy = 0.0, xx = 0.0, yy = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double x = ta[pa * d + j], y = tb[pb * d + j];
      xy += x * y;
      xx += x * x;
      yy += y * y;
    }
    total += xy / std::sqrt(xx * yy);
  }
  return total / static_cast<double>(pairs.size());
}

}  // namespace vega
