#include "vega/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <map>

#include "vega/analysis.hpp"
#include "vega/checkpoint.hpp"
#include "vega/error.hpp"

namespace vega {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Experiments hand the teacher over in memory; the path is only a label.
TrainConfig with_seed(const TrainConfig& base, std::uint64_t seed) {
  TrainConfig c = base;
  c.seed = seed;
  if (c.teacher_checkpoint.empty()) c.teacher_checkpoint = "<context>";
  return c;
}

}  // namespace

ExperimentContext load_context(const std::filesystem::path& data_dir, const std::filesystem::path& teacher_checkpoint) {
  ExperimentContext ctx;
  ctx.train = load_dataset(data_dir / kTrainSplit);
  ctx.eval_easy = load_dataset(data_dir / kEvalEasySplit);
  ctx.eval_hard = load_dataset(data_dir / kEvalHardSplit);
  Checkpoint t = load_checkpoint(teacher_checkpoint);
  if (!t.encoder.frozen) throw ValidationError(teacher_checkpoint.string() + ": teacher checkpoint is not flagged frozen");
  ctx.teacher = std::move(t.encoder);
  return ctx;
}

FinetuneResult train_teacher(const Dataset& train, std::uint64_t seed, FinetuneOptions options) {
  EncoderConfig config;
  config.seed = seed;
  if (train.manifest.feature_dim != config.embed_dim) {
    throw ValidationError("train-teacher: dataset targets have dimension " + std::to_string(train.manifest.feature_dim) +
                          ", encoder width is " + std::to_string(config.embed_dim));
  }
  std::vector<TeacherSample> samples;
  for (std::size_t v = 0; v < train.num_views(); ++v) samples.push_back({&train.images[v], &train.targets[v]});
  options.seed = derive_seed(seed, 8);
  return fit3d_finetune(init_encoder(config), samples, options);
}

RunOutcome train_and_evaluate(const TrainConfig& config, const ExperimentContext& ctx) {
  RunOutcome out;
  out.result = train(config, ctx.data(), &ctx.teacher);
  const PolicyModel policy = out.result.policy();
  out.easy_rate = evaluate(policy, ctx.eval_easy, config.tau).rate;
  out.hard_rate = evaluate(policy, ctx.eval_hard, config.tau).rate;
  return out;
}

std::vector<std::uint64_t> experiment_seeds(std::size_t count) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 1; i <= count; ++i) seeds.push_back(i);
  return seeds;
}

std::vector<LambdaRow> sweep_lambda(const TrainConfig& base, const std::vector<double>& grid,
                                    const std::vector<std::uint64_t>& seeds, const ExperimentContext& ctx) {
  if (grid.empty() || seeds.empty()) throw ValidationError("sweep-lambda: empty grid or seed list");
  std::vector<LambdaRow> rows;
  for (double lambda : grid) {
    for (std::uint64_t seed : seeds) {
      TrainConfig c = with_seed(base, seed);
      c.lambda = lambda;
      c.alignment_enabled = true;
      const RunOutcome r = train_and_evaluate(c, ctx);
      rows.push_back({lambda, seed, r.easy_rate, r.hard_rate});
    }
  }
  return rows;
}

std::string lambda_csv(const std::vector<LambdaRow>& rows) {
  std::string out = "lambda,seed,easy_rate,hard_rate\n";
  for (const auto& r : rows) {
    out += num(r.lambda) + "," + std::to_string(r.seed) + "," + num(r.easy_rate) + "," + num(r.hard_rate) + "\n";
  }
  return out;
}

std::vector<FractionRow> sweep_data_fraction(const TrainConfig& base, const std::vector<double>& fractions,
                                             const std::vector<std::uint64_t>& seeds, const ExperimentContext& ctx) {
  if (fractions.empty() || seeds.empty()) throw ValidationError("sweep-data: empty fraction or seed list");
  std::vector<FractionRow> rows;
  for (double f : fractions) {
    for (const char* variant : {"aligned", "baseline"}) {
      for (std::uint64_t seed : seeds) {
        TrainConfig c = with_seed(base, seed);
        c.data_fraction = f;
        c.alignment_enabled = std::string(variant) == "aligned";
        const RunOutcome r = train_and_evaluate(c, ctx);
        rows.push_back({f, variant, seed, r.easy_rate, r.hard_rate});
      }
    }
  }
  return rows;
}

std::string fraction_csv(const std::vector<FractionRow>& rows) {
  std::string out = "fraction,variant,seed,easy_rate,hard_rate\n";
  for (const auto& r : rows) {
    out += num(r.fraction) + "," + r.variant + "," + std::to_string(r.seed) + "," + num(r.easy_rate) + "," +
           num(r.hard_rate) + "\n";
  }
  return out;
}

std::vector<VariantRow> encoder_variant_experiment(const TrainConfig& base, const std::vector<std::uint64_t>& seeds,
                                                   const ExperimentContext& ctx) {
  if (seeds.empty()) throw ValidationError("variants: empty seed list");
  std::vector<VariantRow> rows;
  for (StudentInit init : {StudentInit::plain, StudentInit::teacher}) {
    for (bool frozen : {true, false}) {
      const std::string name = to_string(init) + (frozen ? "_frozen" : "_unfrozen");
      for (std::uint64_t seed : seeds) {
        TrainConfig c = with_seed(base, seed);
        c.alignment_enabled = false;
        c.student_init = init;
        c.student_frozen = frozen;
        const RunOutcome r = train_and_evaluate(c, ctx);
        rows.push_back({name, seed, r.easy_rate, r.hard_rate});
      }
    }
  }
  return rows;
}

std::string variant_csv(const std::vector<VariantRow>& rows) {
  std::string out = "variant,seed,easy_rate,hard_rate\n";
  for (const auto& r : rows) {
    out += r.variant + "," + std::to_string(r.seed) + "," + num(r.easy_rate) + "," + num(r.hard_rate) + "\n";
  }
  return out;
}

std::vector<ProbeRow> probe_experiment(const TrainConfig& base, const std::vector<std::uint64_t>& seeds,
                                       const ExperimentContext& ctx) {
  std::vector<ProbeRow> rows;
  for (const char* variant : {"aligned", "baseline"}) {
    for (std::uint64_t seed : seeds) {
      TrainConfig c = with_seed(base, seed);
      c.alignment_enabled = std::string(variant) == "aligned";
      const TrainResult r = train(c, ctx.data(), &ctx.teacher);
      rows.push_back({variant, seed, depth_probe(r.checkpoint.encoder, ctx.train, ctx.eval_easy)});
    }
  }
  return rows;
}

std::string probe_csv(const std::vector<ProbeRow>& rows) {
  std::string out = "variant,seed,probe_error\n";
  for (const auto& r : rows) out += r.variant + "," + std::to_string(r.seed) + "," + num(r.probe_error) + "\n";
  return out;
}

GroupStats group_stats(const std::string& group, const std::vector<double>& values) {
  GroupStats s;
  s.group = group;
  s.count = values.size();
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

std::string stats_csv(const std::vector<GroupStats>& stats) {
  std::string out = "group,count,mean,stddev\n";
  for (const auto& s : stats) out += s.group + "," + std::to_string(s.count) + "," + num(s.mean) + "," + num(s.stddev) + "\n";
  return out;
}

std::vector<GroupStats> summarize_lambda(const std::vector<LambdaRow>& rows) {
  std::map<double, std::pair<std::vector<double>, std::vector<double>>> by;
  for (const auto& r : rows) {
    by[r.lambda].first.push_back(r.easy_rate);
    by[r.lambda].second.push_back(r.hard_rate);
  }
  std::vector<GroupStats> out;
  for (const auto& [lambda, v] : by) {
    out.push_back(group_stats("lambda=" + num(lambda) + ":easy", v.first));
    out.push_back(group_stats("lambda=" + num(lambda) + ":hard", v.second));
  }
  return out;
}

std::vector<std::pair<double, double>> fraction_gaps(const std::vector<FractionRow>& rows) {
  std::map<double, std::pair<std::vector<double>, std::vector<double>>> by;
  for (const auto& r : rows) (r.variant == "aligned" ? by[r.fraction].first : by[r.fraction].second).push_back(r.easy_rate);
  std::vector<std::pair<double, double>> out;
  for (const auto& [f, v] : by) {
    out.emplace_back(f, group_stats("", v.first).mean - group_stats("", v.second).mean);
  }
  return out;
}

FeatureAnalysis analyze_features(const std::vector<NamedEncoder>& encoders, const std::vector<const Tensor*>& images,
                                 std::size_t clusters, std::uint64_t seed) {
  if (encoders.empty() || images.empty()) throw ValidationError("analyze: need at least one encoder and one image");
  FeatureAnalysis out;
  const std::size_t m = encoders.size();
  out.rgb.resize(m);
  out.ari = Tensor({m, m});
  for (const auto& e : encoders) out.names.push_back(e.name);
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::vector<Clustering> cl;
    for (std::size_t k = 0; k < m; ++k) {
      const auto maps = encode(*images[i], *encoders[k].encoder, i);
      const Tensor& tokens = encoders[k].layer == TokenLayer::student ? extract_student_tokens(maps).tokens
                                                                       : extract_teacher_tokens(maps).tokens;
      out.rgb[k].push_back(pca_to_rgb(pca(tokens, 3)));
      cl.push_back(kmeans(tokens, clusters, derive_seed(seed, i)));
    }
    const Tensor a = pairwise_ari_matrix(cl);
    for (std::size_t j = 0; j < a.size(); ++j) out.ari[j] += a[j];
  }
  for (double& v : out.ari.values()) v /= static_cast<double>(images.size());
  return out;
}

std::string ari_csv(const FeatureAnalysis& analysis) {
  std::string out = "encoder";
  for (const auto& n : analysis.names) out += "," + n;
  out += "\n";
  const std::size_t m = analysis.names.size();
  for (std::size_t r = 0; r < m; ++r) {
    out += analysis.names[r];
    for (std::size_t c = 0; c < m; ++c) out += "," + num(analysis.ari[r * m + c]);
    out += "\n";
  }
  return out;
}

}  // namespace vega
