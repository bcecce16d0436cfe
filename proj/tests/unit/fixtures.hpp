#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "vega/dataset.hpp"
#include "vega/experiments.hpp"
#include "vega/tensor.hpp"

namespace vega::test {

// Removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("vega_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = dist(gen);
  return t;
}

inline Dataset make_split(const std::filesystem::path& root, std::uint64_t split, std::size_t scenes,
                          Difficulty difficulty) {
  SplitOptions opt;
  opt.split = split;
  opt.num_scenes = scenes;
  opt.difficulty = difficulty;
  write_dataset(root, generate_scenes(opt), opt);
  return load_dataset(root);
}

/// Small splits and a briefly fine-tuned teacher, built once per test binary.
inline const ExperimentContext& small_context() {
  static const ExperimentContext ctx = [] {
    TempDir dir;
    ExperimentContext c;
    c.train = make_split(dir / "train", 0, 24, Difficulty::easy);
    c.eval_easy = make_split(dir / "eval_easy", 1, 8, Difficulty::easy);
    c.eval_hard = make_split(dir / "eval_hard", 2, 8, Difficulty::hard);
    FinetuneOptions opt;
    opt.steps = 20;
    c.teacher = train_teacher(c.train, 3, opt).encoder;
    return c;
  }();
  return ctx;
}

inline TrainConfig small_config(std::size_t steps = 30) {
  TrainConfig c;
  c.steps = steps;
  c.decay_step = steps / 2;
  c.batch_size = 4;
  c.eval_interval = 10;
  c.teacher_checkpoint = "<memory>";
  c.seed = 5;
  return c;
}

}  // namespace vega::test
