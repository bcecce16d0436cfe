#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <string>

#include "fixtures.hpp"
#include "vega/config.hpp"
#include "vega/tensor_io.hpp"

using namespace vega;
using vega::test::TempDir;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(VEGA_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Data, teacher and a short training config shared by the tests below.
class CliWorkspace : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir;
    const std::string d = (*dir_ / "data").string();
    ASSERT_EQ(run("gen-data --train-scenes 12 --eval-scenes 4 --out " + d), 0);
    ASSERT_EQ(run("train-teacher --steps 5 --data " + d + " --out " + (*dir_ / "teacher").string()), 0);
    TrainConfig c;
    c.steps = 20;
    c.decay_step = 10;
    c.batch_size = 4;
    c.eval_interval = 10;
    c.teacher_checkpoint = (*dir_ / "teacher" / "teacher.vegc").string();
    save_config(*dir_ / "c.json", c);
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::string path(const std::string& name) { return (*dir_ / name).string(); }
  static std::string train_args() { return "train --config " + path("c.json") + " --data " + path("data"); }

  static TempDir* dir_;
};
TempDir* CliWorkspace::dir_ = nullptr;

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("gradcheck --bogus"), 1);
  EXPECT_EQ(run("train --config /nonexistent/c.json"), 1);
}

TEST(Cli, GradcheckPasses) { EXPECT_EQ(run("gradcheck"), 0); }

TEST_F(CliWorkspace, TrainTwiceIsByteIdentical) {
  ASSERT_EQ(run(train_args() + " --seed 7 --out " + path("r1")), 0);
  ASSERT_EQ(run(train_args() + " --seed 7 --out " + path("r2")), 0);
  for (const char* f : {"metrics.csv", "checkpoint.vegc", "policy.vegc", "config.json"})
    EXPECT_EQ(io::read_file(*dir_ / "r1" / f), io::read_file(*dir_ / "r2" / f)) << f;
  EXPECT_EQ(run("eval --checkpoint " + path("r1/policy.vegc") + " --data " + path("data") + " --out " + path("ev")), 0);
  EXPECT_TRUE(std::filesystem::exists(*dir_ / "ev" / "eval.csv"));
}

TEST_F(CliWorkspace, ResumeMatchesUninterrupted) {
  ASSERT_EQ(run(train_args() + " --out " + path("full")), 0);
  ASSERT_EQ(run(train_args() + " --stop-after 10 --out " + path("part")), 0);
  ASSERT_EQ(run(train_args() + " --resume " + path("part/checkpoint.vegc") + " --out " + path("part")), 0);
  for (const char* f : {"metrics.csv", "checkpoint.vegc"})
    EXPECT_EQ(io::read_file(*dir_ / "full" / f), io::read_file(*dir_ / "part" / f)) << f;
}

TEST_F(CliWorkspace, ValidationAndRuntimeFailures) {
  TrainConfig c = load_config(path("c.json"));
  c.teacher_checkpoint = path("missing.vegc");
  save_config(*dir_ / "missing.json", c);
  EXPECT_EQ(run("train --config " + path("missing.json") + " --data " + path("data") + " --out " + path("x")), 1);
  c.teacher_checkpoint.clear();
  save_config(*dir_ / "noteacher.json", c);
  EXPECT_EQ(run("train --config " + path("noteacher.json") + " --data " + path("data") + " --out " + path("x")), 1);
  io::write_file(*dir_ / "blocker", "file");
  EXPECT_EQ(run(train_args() + " --out " + path("blocker/sub")), 2);
}
