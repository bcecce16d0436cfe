#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vega/checkpoint.hpp"
#include "vega/config.hpp"
#include "vega/dataset.hpp"
#include "vega/error.hpp"
#include "vega/experiments.hpp"
#include "vega/fit3d.hpp"
#include "vega/gradient_suite.hpp"
#include "vega/tensor_io.hpp"
#include "vega/trainer.hpp"

namespace fs = std::filesystem;
using namespace vega;

namespace {

struct Common {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
};

TrainConfig resolve_config(const Common& c) {
  TrainConfig cfg;
  if (!c.config.empty()) cfg = load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

fs::path out_dir(const Common& c) {
  if (c.out.empty()) throw ValidationError("--out is required");
  fs::create_directories(c.out);
  return c.out;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Tensor upscale(const Tensor& img, std::size_t factor) {
  const std::size_t c = img.dim(0), h = img.dim(1), w = img.dim(2);
  Tensor out({c, h * factor, w * factor});
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < h * factor; ++y)
      for (std::size_t x = 0; x < w * factor; ++x)
        out[(k * h * factor + y) * w * factor + x] = img[(k * h + y / factor) * w + x / factor];
  return out;
}

int cmd_gen_data(const Common& c, std::size_t train_scenes, std::size_t eval_scenes) {
  const fs::path out = out_dir(c);
  const std::uint64_t seed = c.seed.value_or(0);
  struct Split {
    const char* name;
    std::uint64_t id;
    std::size_t scenes;
    Difficulty difficulty;
  };
  for (const Split& s : {Split{kTrainSplit, 0, train_scenes, Difficulty::easy},
                         Split{kEvalEasySplit, 1, eval_scenes, Difficulty::easy},
                         Split{kEvalHardSplit, 2, eval_scenes, Difficulty::hard}}) {
    SplitOptions o;
    o.global_seed = seed;
    o.split = s.id;
    o.num_scenes = s.scenes;
    o.difficulty = s.difficulty;
    write_dataset(out / s.name, generate_scenes(o), o);
    std::cout << "wrote " << (out / s.name).string() << " (" << s.scenes << " scenes)\n";
  }
  return 0;
}

int cmd_train_teacher(const Common& c, std::size_t steps) {
  if (c.data.empty()) throw ValidationError("--data is required");
  const fs::path out = out_dir(c);
  const Dataset train = load_dataset(fs::path(c.data) / kTrainSplit);
  FinetuneOptions opt;
  opt.steps = steps;
  const FinetuneResult r = train_teacher(train, c.seed.value_or(1), opt);
  Checkpoint ckpt;
  ckpt.encoder = r.encoder;
  save_checkpoint(out / "teacher.vegc", ckpt);
  std::string csv = "step,l1_loss\n";
  for (std::size_t i = 0; i < r.losses.size(); ++i) csv += std::to_string(i + 1) + "," + num(r.losses[i]) + "\n";
  io::write_file(out / "fit3d_losses.csv", csv);
  std::cout << "l1 loss " << r.losses.front() << " -> " << r.losses.back() << "\n"
            << "teacher hash " << r.encoder.hash() << "\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& resume, std::size_t stop_after) {
  if (c.data.empty()) throw ValidationError("--data is required");
  const TrainConfig cfg = resolve_config(c);
  const fs::path out = out_dir(c);
  ExperimentContext ctx;
  ctx.train = load_dataset(fs::path(c.data) / kTrainSplit);
  ctx.eval_easy = load_dataset(fs::path(c.data) / kEvalEasySplit);
  ctx.eval_hard = load_dataset(fs::path(c.data) / kEvalHardSplit);
  std::optional<EncoderParams> teacher;
  if (!cfg.teacher_checkpoint.empty()) {
    Checkpoint t = load_checkpoint(cfg.teacher_checkpoint);
    if (!t.encoder.frozen) throw ValidationError(cfg.teacher_checkpoint + ": teacher checkpoint is not flagged frozen");
    teacher = std::move(t.encoder);
  }

  TrainOptions opts;
  opts.stop_after = stop_after;
  std::optional<Checkpoint> resume_ckpt;
  std::vector<MetricsRow> previous;
  if (!resume.empty()) {
    resume_ckpt = load_checkpoint(resume);
    if (!resume_ckpt->state) throw ValidationError(resume + ": not a training checkpoint");
    opts.resume = &*resume_ckpt;
    const fs::path metrics = out / "metrics.csv";
    if (fs::exists(metrics)) {
      for (const MetricsRow& r : parse_metrics(io::read_file(metrics), metrics.string())) {
        if (r.step <= resume_ckpt->state->step) previous.push_back(r);
      }
    }
  }

  TrainResult r = train(cfg, ctx.data(), teacher ? &*teacher : nullptr, opts);
  previous.insert(previous.end(), r.metrics.begin(), r.metrics.end());
  io::write_file(out / "metrics.csv", format_metrics(previous));
  save_checkpoint(out / "checkpoint.vegc", r.checkpoint);
  save_checkpoint(out / "policy.vegc", inference_checkpoint(r.checkpoint));
  save_config(out / "config.json", cfg);
  if (teacher && r.teacher_hash_before != r.teacher_hash_after) {
    throw RuntimeFailure("teacher parameters changed during training");
  }
  if (!previous.empty()) {
    const MetricsRow& last = previous.back();
    std::cout << "step " << last.step << " total " << last.total_loss << " easy " << last.easy_rate << " hard "
              << last.hard_rate << "\n";
  }
  return 0;
}

PolicyModel load_policy(const std::string& path) {
  if (path.empty()) throw ValidationError("--checkpoint is required");
  Checkpoint ckpt = load_checkpoint(path);
  if (!ckpt.head) throw ValidationError(path + ": checkpoint has no action head");
  return PolicyModel{std::move(ckpt.encoder), std::move(*ckpt.head)};
}

int cmd_eval(const Common& c, const std::string& checkpoint, std::optional<double> tau) {
  if (c.data.empty()) throw ValidationError("--data is required");
  const PolicyModel model = load_policy(checkpoint);
  const double t = tau.value_or(c.config.empty() ? TrainConfig{}.tau : load_config(c.config).tau);
  const fs::path out = out_dir(c);
  std::string csv = "split,views,rate,mean_action_error\n";
  for (const char* split : {kEvalEasySplit, kEvalHardSplit}) {
    const Dataset ds = load_dataset(fs::path(c.data) / split);
    const EvalResult r = evaluate(model, ds, t);
    csv += std::string(split) + "," + std::to_string(r.views) + "," + num(r.rate) + "," + num(r.mean_action_error) + "\n";
    std::cout << split << " rate " << r.rate << " mean action error " << r.mean_action_error << "\n";
  }
  io::write_file(out / "eval.csv", csv);
  return 0;
}

int cmd_probe(const Common& c, const std::string& checkpoint) {
  if (c.data.empty()) throw ValidationError("--data is required");
  if (checkpoint.empty()) throw ValidationError("--checkpoint is required");
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const fs::path out = out_dir(c);
  const Dataset train = load_dataset(fs::path(c.data) / kTrainSplit);
  std::string csv = "split,probe_error\n";
  for (const char* split : {kEvalEasySplit, kEvalHardSplit}) {
    const double e = depth_probe(ckpt.encoder, train, load_dataset(fs::path(c.data) / split));
    csv += std::string(split) + "," + num(e) + "\n";
    std::cout << split << " depth probe error " << e << "\n";
  }
  io::write_file(out / "probe.csv", csv);
  return 0;
}

int cmd_analyze(const Common& c, const std::string& teacher_path, const std::vector<std::string>& extra,
                std::size_t images, std::size_t clusters) {
  if (c.data.empty()) throw ValidationError("--data is required");
  if (teacher_path.empty()) throw ValidationError("--teacher is required");
  const fs::path out = out_dir(c);
  const Dataset ds = load_dataset(fs::path(c.data) / kEvalEasySplit);
  const Checkpoint teacher = load_checkpoint(teacher_path);
  EncoderConfig base_cfg = teacher.encoder.config;
  base_cfg.seed = c.seed.value_or(1);
  const EncoderParams plain = init_encoder(base_cfg);
  std::vector<Checkpoint> loaded;
  loaded.reserve(extra.size());
  std::vector<NamedEncoder> encoders = {{"plain", &plain, TokenLayer::student},
                                        {"teacher", &teacher.encoder, TokenLayer::final}};
  for (const std::string& spec : extra) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("--checkpoint expects name=path, got '" + spec + "'");
    loaded.push_back(load_checkpoint(spec.substr(eq + 1)));
    encoders.push_back({spec.substr(0, eq), &loaded.back().encoder, TokenLayer::student});
  }
  std::vector<const Tensor*> imgs;
  for (std::size_t i = 0; i < std::min(images, ds.num_views()); ++i) imgs.push_back(&ds.images[i]);
  const FeatureAnalysis a = analyze_features(encoders, imgs, clusters, c.seed.value_or(0));
  fs::create_directories(out / "pca");
  for (std::size_t e = 0; e < a.names.size(); ++e) {
    for (std::size_t i = 0; i < imgs.size(); ++i) {
      io::write_ppm(out / "pca" / (a.names[e] + "_view" + std::to_string(i) + ".ppm"), upscale(a.rgb[e][i], 8));
    }
  }
  io::write_file(out / "ari.csv", ari_csv(a));
  std::cout << ari_csv(a);
  return 0;
}

void write_sweep(const fs::path& out, const char* name, const std::string& csv) {
  io::write_file(out / name, csv);
  std::cout << csv;
}

int cmd_sweep_lambda(const Common& c, std::size_t seeds) {
  if (c.data.empty()) throw ValidationError("--data is required");
  const TrainConfig cfg = resolve_config(c);
  const fs::path out = out_dir(c);
  const ExperimentContext ctx = load_context(c.data, cfg.teacher_checkpoint);
  const auto rows = sweep_lambda(cfg, kLambdaGrid, experiment_seeds(seeds), ctx);
  write_sweep(out, "lambda_sweep.csv", lambda_csv(rows));
  io::write_file(out / "lambda_summary.csv", stats_csv(summarize_lambda(rows)));
  return 0;
}

int cmd_sweep_data(const Common& c, std::size_t seeds) {
  if (c.data.empty()) throw ValidationError("--data is required");
  const TrainConfig cfg = resolve_config(c);
  const fs::path out = out_dir(c);
  const ExperimentContext ctx = load_context(c.data, cfg.teacher_checkpoint);
  const auto rows = sweep_data_fraction(cfg, kDataFractions, experiment_seeds(seeds), ctx);
  write_sweep(out, "data_sweep.csv", fraction_csv(rows));
  std::string gaps = "fraction,easy_gap\n";
  for (const auto& [f, g] : fraction_gaps(rows)) gaps += num(f) + "," + num(g) + "\n";
  io::write_file(out / "data_gaps.csv", gaps);
  std::cout << gaps;
  return 0;
}

int cmd_variants(const Common& c, std::size_t seeds) {
  if (c.data.empty()) throw ValidationError("--data is required");
  const TrainConfig cfg = resolve_config(c);
  if (cfg.teacher_checkpoint.empty()) throw ValidationError("variants needs teacher_checkpoint in the config");
  const fs::path out = out_dir(c);
  const ExperimentContext ctx = load_context(c.data, cfg.teacher_checkpoint);
  const auto rows = encoder_variant_experiment(cfg, experiment_seeds(seeds), ctx);
  write_sweep(out, "variants.csv", variant_csv(rows));
  return 0;
}

int cmd_gradcheck(const Common& c) {
  const auto entries = run_gradient_suite(gradient_suite_seeds());
  std::map<std::string, double> worst;
  for (const auto& e : entries) worst[e.name] = std::max(worst[e.name], e.max_rel_error);
  for (const auto& [name, w] : worst) std::printf("%-24s %.3e\n", name.c_str(), w);
  const double w = worst_error(entries);
  std::printf("worst relative error %.3e (tolerance 1e-5)\n", w);
  if (!c.out.empty()) {
    std::string csv = "name,seed,max_rel_error,coordinates,resamples\n";
    for (const auto& e : entries) {
      csv += e.name + "," + std::to_string(e.seed) + "," + num(e.max_rel_error) + "," + std::to_string(e.coordinates) +
             "," + std::to_string(e.resamples) + "\n";
    }
    io::write_file(out_dir(c) / "gradcheck.csv", csv);
  }
  return w < 1e-5 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vega: visual-encoder grounding alignment at desk scale"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub, bool config, bool data) {
    if (config) sub->add_option("--config", common.config, "JSON training config")->check(CLI::ExistingFile);
    if (data) sub->add_option("--data", common.data, "dataset directory written by gen-data");
    sub->add_option("--seed", common.seed, "seed override");
    sub->add_option("--out", common.out, "output directory");
  };

  std::size_t train_scenes = 512, eval_scenes = 128;
  auto* gen = app.add_subcommand("gen-data", "generate the train, eval_easy and eval_hard splits");
  add_common(gen, false, false);
  gen->add_option("--train-scenes", train_scenes);
  gen->add_option("--eval-scenes", eval_scenes);

  std::size_t teacher_steps = 500;
  auto* teach = app.add_subcommand("train-teacher", "fine-tune the spatial teacher on rendered feature targets");
  add_common(teach, false, true);
  teach->add_option("--steps", teacher_steps);

  std::string resume;
  std::size_t stop_after = 0;
  auto* tr = app.add_subcommand("train", "joint action + alignment training");
  add_common(tr, true, true);
  tr->add_option("--resume", resume, "training checkpoint to continue from");
  tr->add_option("--stop-after", stop_after, "stop after this step");

  std::string checkpoint;
  std::optional<double> tau;
  auto* ev = app.add_subcommand("eval", "success-proxy rates on both eval splits");
  add_common(ev, true, true);
  ev->add_option("--checkpoint", checkpoint);
  ev->add_option("--tau", tau);

  std::string teacher;
  std::vector<std::string> extra;
  std::size_t images = 4, clusters = 5;
  auto* an = app.add_subcommand("analyze", "PCA images and pairwise ARI of patch features");
  add_common(an, false, true);
  an->add_option("--teacher", teacher);
  an->add_option("--checkpoint", extra, "extra encoders as name=path");
  an->add_option("--images", images);
  an->add_option("--clusters", clusters);

  std::size_t seeds = 5;
  auto* sl = app.add_subcommand("sweep-lambda", "lambda grid x seeds");
  add_common(sl, true, true);
  sl->add_option("--seeds", seeds);
  auto* sd = app.add_subcommand("sweep-data", "data fractions x {aligned, baseline} x seeds");
  add_common(sd, true, true);
  sd->add_option("--seeds", seeds);
  auto* va = app.add_subcommand("variants", "plain/teacher init x frozen/unfrozen student");
  add_common(va, true, true);
  va->add_option("--seeds", seeds);

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  add_common(gc, false, false);

  auto* pr = app.add_subcommand("probe", "linear depth probe on student tokens");
  add_common(pr, false, true);
  pr->add_option("--checkpoint", checkpoint);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  try {
    if (*gen) return cmd_gen_data(common, train_scenes, eval_scenes);
    if (*teach) return cmd_train_teacher(common, teacher_steps);
    if (*tr) return cmd_train(common, resume, stop_after);
    if (*ev) return cmd_eval(common, checkpoint, tau);
    if (*an) return cmd_analyze(common, teacher, extra, images, clusters);
    if (*sl) return cmd_sweep_lambda(common, seeds);
    if (*sd) return cmd_sweep_data(common, seeds);
    if (*va) return cmd_variants(common, seeds);
    if (*gc) return cmd_gradcheck(common);
    if (*pr) return cmd_probe(common, checkpoint);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
