#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vega/checkpoint.hpp"
#include "vega/config.hpp"
#include "vega/dataset.hpp"
#include "vega/model.hpp"

namespace vega {

struct MetricsRow {
  std::size_t step = 0;
  double total_loss = 0.0;
  double action_loss = 0.0;
  double align_loss = 0.0;
  double easy_rate = 0.0;
  double hard_rate = 0.0;
  double wall_ms = 0.0;
};

inline constexpr const char* kMetricsHeader = "step,total_loss,action_loss,align_loss,easy_rate,hard_rate,wall_ms";

// Values are printed with 17 significant digits so they parse back exactly.
std::string format_metrics(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> parse_metrics(const std::string& csv, const std::string& context);

struct TrainData {
  const Dataset* train = nullptr;
  const Dataset* eval_easy = nullptr;
  const Dataset* eval_hard = nullptr;
};

struct TrainOptions {
  // Continue from a training checkpoint instead of initializing.
  const Checkpoint* resume = nullptr;
  // Stop after this step (0 runs to config.steps); the result can be resumed.
  std::size_t stop_after = 0;
};

struct TrainResult {
  Checkpoint checkpoint;  // training checkpoint: params, projector, optimizer, rng, step
  std::vector<MetricsRow> metrics;
  std::vector<double> action_losses;  // one per step run
  std::vector<double> total_losses;
  std::uint64_t teacher_hash_before = 0;
  std::uint64_t teacher_hash_after = 0;

  PolicyModel policy() const;
};

/// Joint training of student encoder, action head and (when alignment is on)
/// projector. Each logged row holds the mean losses over the steps since the
/// previous row and the success-proxy rates after the row's step.
/// `teacher` must be frozen; it is required when alignment is enabled or the
/// student starts from the teacher.
TrainResult train(const TrainConfig& config, const TrainData& data, const EncoderParams* teacher,
                  const TrainOptions& options = {});

// Scene indices a data fraction keeps: the first round(fraction * scenes).
std::size_t scenes_for_fraction(std::size_t num_scenes, double fraction);

struct EvalResult {
  double rate = 0.0;                // fraction of views passing the success proxy
  double mean_action_error = 0.0;   // mean squared action error per view
  std::size_t views = 0;
};

EvalResult evaluate(const PolicyModel& model, const Dataset& dataset, double tau);
// Predictions for every view of a dataset, [views x A].
Tensor predict_dataset(const PolicyModel& model, const Dataset& dataset);

/// Mean-pooled student tokens (block L-2) for every view, [views x d].
Tensor pooled_student_features(const EncoderParams& encoder, const Dataset& dataset);

/// Least-squares readout with a bias term on normal equations (ridge added to
/// the diagonal). Fits on the train rows and returns the mean squared error
/// on the eval rows. A system that is singular even with the ridge is rejected.
double linear_probe_error(const Tensor& train_x, std::span<const double> train_y, const Tensor& eval_x,
                          std::span<const double> eval_y, double ridge = 1e-6);

/// Probe of target depth (normalized z) from pooled student tokens.
double depth_probe(const EncoderParams& encoder, const Dataset& train, const Dataset& eval);

}  // namespace vega
