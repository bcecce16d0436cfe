#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace vega {

enum class StudentInit { plain, teacher };

std::string to_string(StudentInit init);
StudentInit parse_student_init(const std::string& s);

/// Every training hyperparameter. The JSON form uses exactly these field
/// names; unknown keys are rejected and missing keys keep their defaults.
struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 8;
  double learning_rate = 5e-4;
  std::size_t decay_step = 1000;  // rate is multiplied by 0.1 after this step
  double lambda = 0.1;
  bool alignment_enabled = true;
  bool student_frozen = false;
  std::string teacher_checkpoint;
  double data_fraction = 1.0;
  std::uint64_t seed = 0;
  std::size_t eval_interval = 50;
  double tau = 0.2;
  StudentInit student_init = StudentInit::plain;
  // Off by default so that metrics files are reproducible byte for byte.
  bool record_wall_time = false;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

std::string config_to_json(const TrainConfig& config);
TrainConfig config_from_json(const std::string& text, const std::string& context);
TrainConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const TrainConfig& config);

// Base rate up to and including decay_step, 0.1x after it. Steps count from 1.
double lr_at(const TrainConfig& config, std::size_t step);

}  // namespace vega
