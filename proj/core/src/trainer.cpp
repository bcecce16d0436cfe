#include "vega/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "vega/alignment.hpp"
#include "vega/error.hpp"
#include "vega/optim.hpp"
#include "vega/rng.hpp"

namespace vega {

namespace {

constexpr std::size_t kEvalChunk = 32;
constexpr double kClipNorm = 1.0;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

NamedTensors trainable_list(EncoderParams& encoder, ActionHeadParams& head, std::optional<ProjectorParams>& projector) {
  NamedTensors out;
  for (auto& [name, t] : encoder.named()) out.emplace_back("encoder." + name, t);
  for (auto& [name, t] : head.named()) out.emplace_back("head." + name, t);
  if (projector) {
    for (auto& [name, t] : projector->named()) out.emplace_back("projector." + name, t);
  }
  return out;
}

Tensor stack_rows(const std::vector<const Tensor*>& parts) {
  std::size_t rows = 0;
  const std::size_t cols = parts.front()->cols();
  for (const Tensor* p : parts) rows += p->rows();
  Tensor out({rows, cols});
  auto dst = out.values().begin();
  for (const Tensor* p : parts) dst = std::copy(p->values().begin(), p->values().end(), dst);
  return out;
}

// Final-block tokens of the frozen teacher for views [0, count), one [N x d] each.
std::vector<Tensor> teacher_tokens(const EncoderParams& teacher, const Dataset& data, std::size_t count) {
  auto& t = const_cast<EncoderParams&>(teacher);  // bound read-only on a no-grad tape
  std::vector<Tensor> out;
  out.reserve(count);
  const std::size_t n = teacher.config.num_tokens();
  for (std::size_t first = 0; first < count; first += kEvalChunk) {
    const std::size_t last = std::min(count, first + kEvalChunk);
    std::vector<const Tensor*> images;
    for (std::size_t v = first; v < last; ++v) images.push_back(&data.images[v]);
    ad::Tape tape(false);
    ad::Var patches = tape.constant(patchify_batch(images, teacher.config));
    const Tensor& tokens = encode_on_tape(tape, t, patches, teacher.config.num_blocks).back().value();
    for (std::size_t i = 0; i < images.size(); ++i) {
      Tensor one({n, tokens.cols()});
      std::copy(tokens.values().begin() + static_cast<std::ptrdiff_t>(i * n * tokens.cols()),
                tokens.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * n * tokens.cols()),
                one.values().begin());
      out.push_back(std::move(one));
    }
  }
  return out;
}

void check_dataset(const Dataset& data, const EncoderConfig& config, const char* role) {
  if (data.num_views() == 0) throw ValidationError(std::string(role) + " dataset is empty");
  const Tensor& img = data.images.front();
  if (img.shape() != Shape{config.channels, config.image_size, config.image_size}) {
    throw ValidationError(std::string(role) + " images have shape " + shape_string(img.shape()) +
                          ", encoder expects " +
                          shape_string({config.channels, config.image_size, config.image_size}));
  }
}

}  // namespace

std::string format_metrics(const std::vector<MetricsRow>& rows) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const MetricsRow& r : rows) {
    out += std::to_string(r.step) + "," + fmt(r.total_loss) + "," + fmt(r.action_loss) + "," + fmt(r.align_loss) +
           "," + fmt(r.easy_rate) + "," + fmt(r.hard_rate) + "," + fmt(r.wall_ms) + "\n";
  }
  return out;
}

std::vector<MetricsRow> parse_metrics(const std::string& csv, const std::string& context) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw ValidationError(context + ": missing metrics header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    MetricsRow r;
    if (std::sscanf(line.c_str(), "%zu,%lf,%lf,%lf,%lf,%lf,%lf", &r.step, &r.total_loss, &r.action_loss,
                    &r.align_loss, &r.easy_rate, &r.hard_rate, &r.wall_ms) != 7) {
      throw ValidationError(context + ": malformed metrics row '" + line + "'");
    }
    rows.push_back(r);
  }
  return rows;
}

PolicyModel TrainResult::policy() const {
  if (!checkpoint.head) throw ValidationError("training result has no action head");
  return PolicyModel{checkpoint.encoder, *checkpoint.head};
}

std::size_t scenes_for_fraction(std::size_t num_scenes, double fraction) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(num_scenes)));
}

TrainResult train(const TrainConfig& config, const TrainData& data, const EncoderParams* teacher,
                  const TrainOptions& options) {
  config.validate();
  if (!data.train || !data.eval_easy || !data.eval_hard) throw ValidationError("train: train and eval splits are required");
  const bool needs_teacher = config.alignment_enabled || config.student_init == StudentInit::teacher;
  if (needs_teacher && !teacher) throw ValidationError("train: a teacher encoder is required by this config");
  if (teacher && !teacher->frozen) throw ValidationError("train: the teacher encoder must be frozen");

  const EncoderConfig enc_config = teacher ? teacher->config : EncoderConfig{};
  check_dataset(*data.train, enc_config, "train");
  check_dataset(*data.eval_easy, enc_config, "eval_easy");
  check_dataset(*data.eval_hard, enc_config, "eval_hard");
  if (data.train->actions.cols() != kActionDim) throw ValidationError("train: dataset actions are not 4-dimensional");

  TrainResult result;
  if (teacher) result.teacher_hash_before = teacher->hash();

  // Model initialization, each part from its own seed stream.
  EncoderParams student;
  if (config.student_init == StudentInit::teacher) {
    student = *teacher;
    student.unfreeze();
  } else {
    EncoderConfig c = enc_config;
    c.seed = derive_seed(config.seed, 1);
    student = init_encoder(c);
  }
  ActionHeadParams head = init_action_head(enc_config.embed_dim, kActionDim, derive_seed(config.seed, 2));
  std::optional<ProjectorParams> projector;
  if (config.alignment_enabled) projector = init_projector(enc_config.embed_dim, derive_seed(config.seed, 3));
  Rng rng(derive_seed(config.seed, 4));
  std::size_t start = 0;
  std::array<double, 4> interval{};

  Adam adam(trainable_list(student, head, projector));
  if (options.resume) {
    const Checkpoint& r = *options.resume;
    if (!r.state || !r.head || r.projector.has_value() != config.alignment_enabled) {
      throw ValidationError("train: resume checkpoint does not match this config");
    }
    EncoderConfig saved = r.encoder.config;
    saved.seed = enc_config.seed;
    if (saved != enc_config) throw ValidationError("train: resume checkpoint encoder architecture differs");
    student = r.encoder;
    head = *r.head;
    projector = r.projector;
    adam = Adam(trainable_list(student, head, projector));
    if (r.state->adam_m.size() != adam.params().size()) {
      throw ValidationError("train: resume checkpoint optimizer state does not match the parameter list");
    }
    for (std::size_t i = 0; i < adam.params().size(); ++i) {
      if (r.state->adam_m[i].shape() != adam.params()[i].second->shape() ||
          r.state->adam_v[i].shape() != adam.params()[i].second->shape()) {
        throw ValidationError("train: resume optimizer slot " + adam.params()[i].first + " has the wrong shape");
      }
      adam.first_moment()[i] = r.state->adam_m[i];
      adam.second_moment()[i] = r.state->adam_v[i];
    }
    adam.set_steps_taken(r.state->adam_steps);
    rng = Rng::from_state(r.state->rng);
    start = r.state->step;
    interval = r.state->interval;
    if (start > config.steps) throw ValidationError("train: resume step is past the configured steps");
  }
  student.unfreeze();
  head.set_trainable(true);
  if (projector) projector->set_trainable(true);
  if (config.student_frozen) student.freeze();

  const Dataset& train_set = *data.train;
  const std::size_t views = scenes_for_fraction(train_set.num_scenes(), config.data_fraction) * train_set.views_per_scene();
  if (views == 0) throw ValidationError("train: the data fraction keeps no scenes");
  const std::size_t n = enc_config.num_tokens();
  std::vector<Tensor> patches;
  patches.reserve(views);
  for (std::size_t v = 0; v < views; ++v) patches.push_back(patchify(train_set.images[v], enc_config));
  std::vector<Tensor> targets;
  if (config.alignment_enabled) targets = teacher_tokens(*teacher, train_set, views);

  const AlignmentConfig align_cfg{config.lambda, config.alignment_enabled};
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t stop = options.stop_after == 0 ? config.steps : std::min(options.stop_after, config.steps);

  for (std::size_t step = start + 1; step <= stop; ++step) {
    std::vector<const Tensor*> batch_patches, batch_targets;
    Tensor gt({config.batch_size, kActionDim});
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const auto v = static_cast<std::size_t>(rng.below(views));
      batch_patches.push_back(&patches[v]);
      if (config.alignment_enabled) batch_targets.push_back(&targets[v]);
      const std::size_t scene = train_set.scene_of_view(v);
      for (std::size_t a = 0; a < kActionDim; ++a) gt[b * kActionDim + a] = train_set.actions[scene * kActionDim + a];
    }

    ad::Tape tape;
    ad::Var x = tape.constant(stack_rows(batch_patches));
    ad::Var tokens = student_tokens_on_tape(tape, student, x);
    ad::Var pred = action_head_forward(tape, head, tokens, n);
    ad::Var l_action = action_loss(pred, tape.constant(gt));
    ad::Var l_align;
    double align_value = 0.0;
    if (config.alignment_enabled) {
      ad::Var projected = project(tape, *projector, tokens);
      l_align = align_loss(projected, tape.constant(stack_rows(batch_targets)));
      align_value = l_align.value().item();
    }
    ad::Var total = vega_loss(l_action, l_align, align_cfg);
    const double total_value = total.value().item();
    const double action_value = l_action.value().item();
    if (!std::isfinite(total_value)) {
      throw RuntimeFailure("training aborted: non-finite loss at step " + std::to_string(step));
    }

    adam.zero_grad();
    tape.backward(total);
    clip_grad_norm(adam.params(), kClipNorm);
    adam.step(lr_at(config, step));

    result.action_losses.push_back(action_value);
    result.total_losses.push_back(total_value);
    interval[0] += total_value;
    interval[1] += action_value;
    interval[2] += align_value;
    interval[3] += 1.0;

    if (step % config.eval_interval == 0 || step == config.steps) {
      MetricsRow row;
      row.step = step;
      row.total_loss = interval[0] / interval[3];
      row.action_loss = interval[1] / interval[3];
      row.align_loss = interval[2] / interval[3];
      const PolicyModel policy{student, head};
      row.easy_rate = evaluate(policy, *data.eval_easy, config.tau).rate;
      row.hard_rate = evaluate(policy, *data.eval_hard, config.tau).rate;
      if (config.record_wall_time) {
        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      }
      result.metrics.push_back(row);
      interval = {};
    }
  }

  student.frozen = config.student_frozen;
  TrainState state;
  state.step = std::max(start, stop);
  state.adam_steps = adam.steps_taken();
  state.adam_m = adam.first_moment();
  state.adam_v = adam.second_moment();
  state.rng = rng.state();
  state.interval = interval;
  result.checkpoint.encoder = std::move(student);
  result.checkpoint.head = std::move(head);
  result.checkpoint.projector = std::move(projector);
  result.checkpoint.state = std::move(state);
  if (teacher) result.teacher_hash_after = teacher->hash();
  return result;
}

Tensor predict_dataset(const PolicyModel& model, const Dataset& dataset) {
  Tensor out({dataset.num_views(), kActionDim});
  for (std::size_t first = 0; first < dataset.num_views(); first += kEvalChunk) {
    const std::size_t last = std::min(dataset.num_views(), first + kEvalChunk);
    std::vector<const Tensor*> images;
    for (std::size_t v = first; v < last; ++v) images.push_back(&dataset.images[v]);
    const Tensor pred = predict_batch(model, images);
    if (pred.cols() != kActionDim) throw ValidationError("evaluate: model action dimension differs from the dataset");
    std::copy(pred.values().begin(), pred.values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(first * kActionDim));
  }
  return out;
}

EvalResult evaluate(const PolicyModel& model, const Dataset& dataset, double tau) {
  check_dataset(dataset, model.encoder.config, "eval");
  if (model.head.input_dim() != model.encoder.config.embed_dim) {
    throw ValidationError("evaluate: action head input width differs from the encoder width");
  }
  const Tensor pred = predict_dataset(model, dataset);
  EvalResult r;
  r.views = dataset.num_views();
  std::size_t passed = 0;
  double err = 0.0;
  for (std::size_t v = 0; v < r.views; ++v) {
    const Action p(pred.values().begin() + static_cast<std::ptrdiff_t>(v * kActionDim),
                   pred.values().begin() + static_cast<std::ptrdiff_t>((v + 1) * kActionDim));
    const Action gt = dataset.action(dataset.scene_of_view(v));
    if (success_proxy(p, gt, tau)) ++passed;
    double se = 0.0;
    for (std::size_t a = 0; a < kActionDim; ++a) se += (p[a] - gt[a]) * (p[a] - gt[a]);
    err += se / static_cast<double>(kActionDim);
  }
  r.rate = static_cast<double>(passed) / static_cast<double>(r.views);
  r.mean_action_error = err / static_cast<double>(r.views);
  return r;
}

Tensor pooled_student_features(const EncoderParams& encoder, const Dataset& dataset) {
  check_dataset(dataset, encoder.config, "probe");
  auto& e = const_cast<EncoderParams&>(encoder);
  const std::size_t d = encoder.config.embed_dim;
  Tensor out({dataset.num_views(), d});
  for (std::size_t first = 0; first < dataset.num_views(); first += kEvalChunk) {
    const std::size_t last = std::min(dataset.num_views(), first + kEvalChunk);
    std::vector<const Tensor*> images;
    for (std::size_t v = first; v < last; ++v) images.push_back(&dataset.images[v]);
    ad::Tape tape(false);
    ad::Var patches = tape.constant(patchify_batch(images, encoder.config));
    const Tensor& pooled = ad::mean_pool(student_tokens_on_tape(tape, e, patches), encoder.config.num_tokens()).value();
    std::copy(pooled.values().begin(), pooled.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(first * d));
  }
  return out;
}

double linear_probe_error(const Tensor& train_x, std::span<const double> train_y, const Tensor& eval_x,
                          std::span<const double> eval_y, double ridge) {
  if (train_x.rank() != 2 || eval_x.rank() != 2 || train_x.cols() != eval_x.cols()) {
    throw ValidationError("linear probe: feature matrices must be [rows x d] with equal d");
  }
  if (train_x.rows() != train_y.size() || eval_x.rows() != eval_y.size() || eval_y.empty()) {
    throw ValidationError("linear probe: feature and target counts differ");
  }
  const std::size_t d = train_x.cols(), p = d + 1;
  // Normal equations over [x, 1].
  std::vector<double> a(p * p, 0.0), rhs(p, 0.0);
  for (std::size_t i = 0; i < train_x.rows(); ++i) {
    for (std::size_t r = 0; r < p; ++r) {
      const double xr = r < d ? train_x[i * d + r] : 1.0;
      rhs[r] += xr * train_y[i];
      for (std::size_t c = 0; c <= r; ++c) a[r * p + c] += xr * (c < d ? train_x[i * d + c] : 1.0);
    }
  }
  for (std::size_t r = 0; r < p; ++r) a[r * p + r] += ridge;
  // Cholesky, lower triangle in place.
  for (std::size_t j = 0; j < p; ++j) {
    double diag = a[j * p + j];
    for (std::size_t k = 0; k < j; ++k) diag -= a[j * p + k] * a[j * p + k];
    if (!(diag > 0.0)) throw ValidationError("linear probe: normal equations are singular even with the ridge");
    a[j * p + j] = std::sqrt(diag);
    for (std::size_t i = j + 1; i < p; ++i) {
      double s = a[i * p + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * p + k] * a[j * p + k];
      a[i * p + j] = s / a[j * p + j];
    }
  }
  std::vector<double> w(rhs);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t k = 0; k < i; ++k) w[i] -= a[i * p + k] * w[k];
    w[i] /= a[i * p + i];
  }
  for (std::size_t i = p; i-- > 0;) {
    for (std::size_t k = i + 1; k < p; ++k) w[i] -= a[k * p + i] * w[k];
    w[i] /= a[i * p + i];
  }
  double err = 0.0;
  for (std::size_t i = 0; i < eval_x.rows(); ++i) {
    double y = w[d];
    for (std::size_t c = 0; c < d; ++c) y += w[c] * eval_x[i * d + c];
    err += (y - eval_y[i]) * (y - eval_y[i]);
  }
  return err / static_cast<double>(eval_x.rows());
}

double depth_probe(const EncoderParams& encoder, const Dataset& train, const Dataset& eval) {
  auto depths = [](const Dataset& ds) {
    std::vector<double> z(ds.num_views());
    for (std::size_t v = 0; v < z.size(); ++v) z[v] = ds.actions[ds.scene_of_view(v) * kActionDim + 2];
    return z;
  };
  return linear_probe_error(pooled_student_features(encoder, train), depths(train),
                            pooled_student_features(encoder, eval), depths(eval));
}

}  // namespace vega
