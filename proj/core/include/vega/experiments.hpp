#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "vega/config.hpp"
#include "vega/dataset.hpp"
#include "vega/encoder.hpp"
#include "vega/fit3d.hpp"
#include "vega/trainer.hpp"

namespace vega {

/// The three standard splits and the frozen teacher every experiment shares.
struct ExperimentContext {
  Dataset train, eval_easy, eval_hard;
  EncoderParams teacher;

  TrainData data() const { return {&train, &eval_easy, &eval_hard}; }
};

// Loads <data>/train, <data>/eval_easy, <data>/eval_hard and the teacher checkpoint.
ExperimentContext load_context(const std::filesystem::path& data_dir, const std::filesystem::path& teacher_checkpoint);

/// Fine-tunes a freshly initialized encoder (default architecture, the given
/// seed) toward the train split's rendered targets. The result is frozen.
FinetuneResult train_teacher(const Dataset& train, std::uint64_t seed, FinetuneOptions options = {});

struct RunOutcome {
  double easy_rate = 0.0;
  double hard_rate = 0.0;
  TrainResult result;
};

// Trains to completion and evaluates the final model on both eval splits.
RunOutcome train_and_evaluate(const TrainConfig& config, const ExperimentContext& ctx);

// Seeds 1..count.
std::vector<std::uint64_t> experiment_seeds(std::size_t count = 5);
inline const std::vector<double> kLambdaGrid = {0.05, 0.1, 0.2};
inline const std::vector<double> kDataFractions = {0.25, 0.5, 0.75, 1.0};

struct LambdaRow {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  double easy_rate = 0.0, hard_rate = 0.0;
};
std::vector<LambdaRow> sweep_lambda(const TrainConfig& base, const std::vector<double>& grid,
                                    const std::vector<std::uint64_t>& seeds, const ExperimentContext& ctx);
std::string lambda_csv(const std::vector<LambdaRow>& rows);

struct FractionRow {
  double fraction = 0.0;
  std::string variant;  // "aligned" or "baseline"
  std::uint64_t seed = 0;
  double easy_rate = 0.0, hard_rate = 0.0;
};
/// The aligned model uses the base lambda; the baseline trains the same
/// action path with alignment disabled.
std::vector<FractionRow> sweep_data_fraction(const TrainConfig& base, const std::vector<double>& fractions,
                                             const std::vector<std::uint64_t>& seeds, const ExperimentContext& ctx);
std::string fraction_csv(const std::vector<FractionRow>& rows);

struct VariantRow {
  std::string variant;  // "<init>_<frozen|unfrozen>"
  std::uint64_t seed = 0;
  double easy_rate = 0.0, hard_rate = 0.0;
};
// {plain, teacher} init x {frozen, unfrozen} student, alignment disabled.
std::vector<VariantRow> encoder_variant_experiment(const TrainConfig& base, const std::vector<std::uint64_t>& seeds,
                                                   const ExperimentContext& ctx);
std::string variant_csv(const std::vector<VariantRow>& rows);

struct ProbeRow {
  std::string variant;  // "aligned" or "baseline"
  std::uint64_t seed = 0;
  double probe_error = 0.0;
};
// Depth-probe error of aligned and alignment-disabled students, evaluated on the easy split.
std::vector<ProbeRow> probe_experiment(const TrainConfig& base, const std::vector<std::uint64_t>& seeds,
                                       const ExperimentContext& ctx);
std::string probe_csv(const std::vector<ProbeRow>& rows);

struct GroupStats {
  std::string group;
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single value
};
GroupStats group_stats(const std::string& group, const std::vector<double>& values);
std::string stats_csv(const std::vector<GroupStats>& stats);

// Per-lambda mean and spread of the easy and hard rates.
std::vector<GroupStats> summarize_lambda(const std::vector<LambdaRow>& rows);
// Per fraction: mean aligned easy rate minus mean baseline easy rate.
std::vector<std::pair<double, double>> fraction_gaps(const std::vector<FractionRow>& rows);

/// Which token map an encoder contributes to the feature analysis.
enum class TokenLayer { student, final };

struct NamedEncoder {
  std::string name;
  const EncoderParams* encoder = nullptr;
  TokenLayer layer = TokenLayer::student;
};

struct FeatureAnalysis {
  std::vector<std::string> names;
  // rgb[e][i]: PCA visualization [3 x g x g] of encoder e on image i.
  std::vector<std::vector<Tensor>> rgb;
  // Pairwise ARI of k-means patch clusterings, averaged over the images.
  Tensor ari;
};

FeatureAnalysis analyze_features(const std::vector<NamedEncoder>& encoders, const std::vector<const Tensor*>& images,
                                 std::size_t clusters = 5, std::uint64_t seed = 0);
// Header row of encoder names, then one row per encoder.
std::string ari_csv(const FeatureAnalysis& analysis);

}  // namespace vega
