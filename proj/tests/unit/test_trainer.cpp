#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "vega/checkpoint.hpp"
#include "vega/error.hpp"
#include "vega/trainer.hpp"

using namespace vega;
using vega::test::small_config;
using vega::test::small_context;

TEST(Trainer, RepeatedRunsAreByteIdentical) {
  const auto& ctx = small_context();
  const TrainResult a = train(small_config(), ctx.data(), &ctx.teacher);
  const TrainResult b = train(small_config(), ctx.data(), &ctx.teacher);
  EXPECT_EQ(format_metrics(a.metrics), format_metrics(b.metrics));
  EXPECT_EQ(encode_checkpoint(a.checkpoint), encode_checkpoint(b.checkpoint));
}

TEST(Trainer, ResumeMatchesUninterruptedRun) {
  const auto& ctx = small_context();
  const TrainConfig cfg = small_config(30);
  const TrainResult full = train(cfg, ctx.data(), &ctx.teacher);
  TrainOptions first;
  first.stop_after = 15;
  const TrainResult half = train(cfg, ctx.data(), &ctx.teacher, first);
  EXPECT_EQ(half.checkpoint.state->step, 15u);
  const Checkpoint saved = decode_checkpoint(encode_checkpoint(half.checkpoint), "half");
  TrainOptions second;
  second.resume = &saved;
  const TrainResult rest = train(cfg, ctx.data(), &ctx.teacher, second);
  EXPECT_EQ(encode_checkpoint(rest.checkpoint), encode_checkpoint(full.checkpoint));
  std::vector<MetricsRow> joined = half.metrics;
  joined.insert(joined.end(), rest.metrics.begin(), rest.metrics.end());
  EXPECT_EQ(format_metrics(joined), format_metrics(full.metrics));
}

TEST(Trainer, LoggedRowsObeyLossAlgebra) {
  const auto& ctx = small_context();
  const TrainConfig cfg = small_config(30);
  const TrainResult r = train(cfg, ctx.data(), &ctx.teacher);
  ASSERT_EQ(r.metrics.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    const MetricsRow& row = r.metrics[i];
    EXPECT_EQ(row.step, 10 * (i + 1));
    EXPECT_NEAR(row.total_loss, row.action_loss + cfg.lambda * row.align_loss, 1e-12);
    EXPECT_GE(row.align_loss, 0.0);
    EXPECT_LE(row.align_loss, 2.0);
    EXPECT_EQ(row.wall_ms, 0.0);
  }
  EXPECT_EQ(r.teacher_hash_before, ctx.teacher.hash());
  EXPECT_EQ(r.teacher_hash_after, ctx.teacher.hash());
}

TEST(Trainer, DisabledAlignmentMatchesZeroLambda) {
  const auto& ctx = small_context();
  TrainConfig off = small_config(20);
  off.alignment_enabled = false;
  TrainConfig zero = small_config(20);
  zero.lambda = 0.0;
  const TrainResult a = train(off, ctx.data(), &ctx.teacher);
  const TrainResult b = train(zero, ctx.data(), &ctx.teacher);
  ASSERT_EQ(a.action_losses.size(), b.action_losses.size());
  for (std::size_t i = 0; i < a.action_losses.size(); ++i) EXPECT_NEAR(a.action_losses[i], b.action_losses[i], 1e-12);
  EXPECT_FALSE(a.checkpoint.projector.has_value());
}

TEST(Trainer, FrozenStudentKeepsEncoder) {
  const auto& ctx = small_context();
  TrainConfig cfg = small_config(10);
  cfg.alignment_enabled = false;
  cfg.student_frozen = true;
  cfg.student_init = StudentInit::teacher;
  const TrainResult r = train(cfg, ctx.data(), &ctx.teacher);
  EXPECT_EQ(r.checkpoint.encoder.hash(), ctx.teacher.hash());
  EXPECT_NE(r.checkpoint.head->w1.data(), init_action_head(32, kActionDim, derive_seed(cfg.seed, 2)).w1.data());
}

TEST(Trainer, LearnsOnSmallRun) {
  const auto& ctx = small_context();
  TrainConfig cfg = small_config(200);
  cfg.eval_interval = 50;
  const TrainResult r = train(cfg, ctx.data(), &ctx.teacher);
  EXPECT_LT(r.metrics.back().total_loss, r.metrics.front().total_loss);
}

TEST(Trainer, RejectsBadInputs) {
  const auto& ctx = small_context();
  EXPECT_THROW(train(small_config(), ctx.data(), nullptr), ValidationError);
  EncoderParams thawed = ctx.teacher;
  thawed.unfreeze();
  EXPECT_THROW(train(small_config(), ctx.data(), &thawed), ValidationError);
  TrainData missing = ctx.data();
  missing.eval_hard = nullptr;
  EXPECT_THROW(train(small_config(), missing, &ctx.teacher), ValidationError);
}

TEST(Trainer, NonFiniteLossAborts) {
  const auto& ctx = small_context();
  Dataset poisoned = ctx.train;
  for (Tensor& img : poisoned.images) img[0] = std::nan("");
  TrainData data = ctx.data();
  data.train = &poisoned;
  TrainConfig cfg = small_config(5);
  cfg.alignment_enabled = false;
  try {
    train(cfg, data, &ctx.teacher);
    FAIL() << "expected an abort";
  } catch (const RuntimeFailure& e) {
    EXPECT_NE(std::string(e.what()).find("non-finite loss at step 1"), std::string::npos) << e.what();
  }
}

TEST(Trainer, DataFractionKeepsScenePrefix) {
  EXPECT_EQ(scenes_for_fraction(512, 0.25), 128u);
  EXPECT_EQ(scenes_for_fraction(512, 0.5), 256u);
  EXPECT_EQ(scenes_for_fraction(512, 1.0), 512u);
  EXPECT_EQ(scenes_for_fraction(24, 0.75), 18u);
}

TEST(Metrics, CsvRoundTrip) {
  std::vector<MetricsRow> rows{{50, 0.1, 0.09, 0.1 / 3, 0.25, 0.125, 0}, {100, 1e-17, 2.5, 0, 1, 0, 12.5}};
  const std::string csv = format_metrics(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kMetricsHeader);
  const auto back = parse_metrics(csv, "m");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].align_loss, rows[0].align_loss);
  EXPECT_EQ(format_metrics(back), csv);
  EXPECT_THROW(parse_metrics("step\n1\n", "m"), ValidationError);
}

TEST(Evaluate, RatesAndCounts) {
  const auto& ctx = small_context();
  const TrainResult r = train(small_config(10), ctx.data(), &ctx.teacher);
  const EvalResult e = evaluate(r.policy(), ctx.eval_easy, 0.2);
  EXPECT_EQ(e.views, ctx.eval_easy.num_views());
  EXPECT_GE(e.rate, 0.0);
  EXPECT_LE(e.rate, 1.0);
  EXPECT_EQ(evaluate(r.policy(), ctx.eval_easy, 100.0).rate, 1.0);
  const Tensor pred = predict_dataset(r.policy(), ctx.eval_easy);
  double mse = 0;
  for (std::size_t v = 0; v < pred.rows(); ++v) {
    const Action gt = ctx.eval_easy.action(ctx.eval_easy.scene_of_view(v));
    for (std::size_t a = 0; a < kActionDim; ++a) mse += (pred.at(v, a) - gt[a]) * (pred.at(v, a) - gt[a]) / kActionDim;
  }
  EXPECT_NEAR(e.mean_action_error, mse / static_cast<double>(pred.rows()), 1e-12);
}

TEST(Probe, PlantedSignalIsRecovered) {
  Tensor train_x = vega::test::random_tensor({40, 5}, 1), eval_x = vega::test::random_tensor({20, 5}, 2);
  std::vector<double> train_y(40), eval_y(20);
  for (std::size_t i = 0; i < 40; ++i) train_y[i] = 0.3 + 2.0 * train_x.at(i, 3);
  for (std::size_t i = 0; i < 20; ++i) eval_y[i] = 0.3 + 2.0 * eval_x.at(i, 3);
  EXPECT_LT(linear_probe_error(train_x, train_y, eval_x, eval_y), 1e-10);
}

TEST(Probe, SingularSystemRejected) {
  Tensor x({10, 2});
  std::vector<double> y(10, 1.0);
  EXPECT_THROW(linear_probe_error(x, y, x, y, 0.0), ValidationError);
  EXPECT_THROW(linear_probe_error(x, std::vector<double>(3), x, y), ValidationError);
}

TEST(Probe, DepthProbeIsFinite) {
  const auto& ctx = small_context();
  const double e = depth_probe(ctx.teacher, ctx.train, ctx.eval_easy);
  EXPECT_TRUE(std::isfinite(e));
  EXPECT_GE(e, 0.0);
}
