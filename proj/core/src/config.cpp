#include "vega/config.hpp"

#include <cmath>
#include <json.hpp>
#include <set>

#include "vega/error.hpp"
#include "vega/tensor_io.hpp"

namespace vega {

using nlohmann::json;

std::string to_string(StudentInit init) { return init == StudentInit::plain ? "plain" : "teacher"; }

StudentInit parse_student_init(const std::string& s) {
  if (s == "plain") return StudentInit::plain;
  if (s == "teacher") return StudentInit::teacher;
  throw ValidationError("student_init must be \"plain\" or \"teacher\", got \"" + s + "\"");
}

void TrainConfig::validate() const {
  if (steps == 0) throw ValidationError("config: steps must be positive");
  if (batch_size == 0) throw ValidationError("config: batch_size must be positive");
  if (!(std::isfinite(learning_rate) && learning_rate > 0.0)) throw ValidationError("config: learning_rate must be positive");
  if (decay_step > steps) throw ValidationError("config: decay_step must not exceed steps");
  if (!(std::isfinite(lambda) && lambda >= 0.0)) throw ValidationError("config: lambda must be finite and >= 0");
  if (data_fraction != 0.25 && data_fraction != 0.5 && data_fraction != 0.75 && data_fraction != 1.0) {
    throw ValidationError("config: data_fraction must be one of 0.25, 0.5, 0.75, 1.0");
  }
  if (eval_interval == 0) throw ValidationError("config: eval_interval must be positive");
  if (!(std::isfinite(tau) && tau > 0.0)) throw ValidationError("config: tau must be positive");
  if (alignment_enabled && teacher_checkpoint.empty()) {
    throw ValidationError("config: alignment_enabled requires teacher_checkpoint");
  }
  if (student_init == StudentInit::teacher && teacher_checkpoint.empty()) {
    throw ValidationError("config: student_init \"teacher\" requires teacher_checkpoint");
  }
}

std::string config_to_json(const TrainConfig& c) {
  json j = {{"steps", c.steps},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"decay_step", c.decay_step},
            {"lambda", c.lambda},
            {"alignment_enabled", c.alignment_enabled},
            {"student_frozen", c.student_frozen},
            {"teacher_checkpoint", c.teacher_checkpoint},
            {"data_fraction", c.data_fraction},
            {"seed", c.seed},
            {"eval_interval", c.eval_interval},
            {"tau", c.tau},
            {"student_init", to_string(c.student_init)},
            {"record_wall_time", c.record_wall_time}};
  return j.dump(2) + "\n";
}

TrainConfig config_from_json(const std::string& text, const std::string& context) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(context + ": malformed JSON: " + e.what());
  }
  if (!j.is_object()) throw ValidationError(context + ": config must be a JSON object");
  static const std::set<std::string> known = {"steps",         "batch_size",    "learning_rate",     "decay_step",
                                              "lambda",        "alignment_enabled", "student_frozen", "teacher_checkpoint",
                                              "data_fraction", "seed",          "eval_interval",     "tau",
                                              "student_init",  "record_wall_time"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ValidationError(context + ": unknown config key '" + key + "'");
  }
  TrainConfig c;
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const json::exception&) {
      throw ValidationError(context + ": config key '" + std::string(key) + "' has the wrong type");
    }
  };
  auto get_count = [&](const char* key, auto& field) {
    if (j.contains(key) && !j.at(key).is_number_unsigned()) {
      throw ValidationError(context + ": config key '" + std::string(key) + "' must be a non-negative integer");
    }
    get(key, field);
  };
  get_count("steps", c.steps);
  get_count("batch_size", c.batch_size);
  get("learning_rate", c.learning_rate);
  get_count("decay_step", c.decay_step);
  get("lambda", c.lambda);
  get("alignment_enabled", c.alignment_enabled);
  get("student_frozen", c.student_frozen);
  get("teacher_checkpoint", c.teacher_checkpoint);
  get("data_fraction", c.data_fraction);
  get_count("seed", c.seed);
  get_count("eval_interval", c.eval_interval);
  get("tau", c.tau);
  std::string init = to_string(c.student_init);
  get("student_init", init);
  c.student_init = parse_student_init(init);
  get("record_wall_time", c.record_wall_time);
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  return config_from_json(io::read_file(path), path.string());
}

void save_config(const std::filesystem::path& path, const TrainConfig& config) {
  io::write_file(path, config_to_json(config));
}

double lr_at(const TrainConfig& config, std::size_t step) {
  return step <= config.decay_step ? config.learning_rate : 0.1 * config.learning_rate;
}

}  // namespace vega
