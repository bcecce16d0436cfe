#include <benchmark/benchmark.h>

#include <vector>

#include "vega/alignment.hpp"
#include "vega/analysis.hpp"
#include "vega/autodiff.hpp"
#include "vega/fit3d.hpp"
#include "vega/model.hpp"
#include "vega/rng.hpp"
#include "vega/scene.hpp"

using namespace vega;

namespace {

Tensor normal(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.normal();
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = normal({n, n}, 1), b = normal({n, n}, 2);
  Tensor c({n, n});
  for (auto _ : state) {
    ad::kernels::matmul(a.values(), b.values(), c.values(), n, n, n);
    benchmark::DoNotOptimize(c.values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128);

void BM_AttentionForwardBackward(benchmark::State& state) {
  Tensor qkv = normal({8 * 16, 96}, 3);
  qkv.set_requires_grad(true);
  for (auto _ : state) {
    ad::Tape tape;
    tape.backward(ad::sum(ad::self_attention(tape.param(qkv), 16, 4)));
    qkv.zero_grad();
  }
}
BENCHMARK(BM_AttentionForwardBackward);

void BM_EncoderForward(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  EncoderParams enc = init_encoder(EncoderConfig{});
  enc.freeze();
  const Tensor patches = normal({batch * 16, 192}, 4);
  for (auto _ : state) {
    ad::Tape tape(false);
    benchmark::DoNotOptimize(encode_on_tape(tape, enc, tape.constant(patches), 4).back().value().values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(batch));
}
BENCHMARK(BM_EncoderForward)->Arg(1)->Arg(8);

// One joint loss forward + backward at the default batch size.
void BM_TrainStep(benchmark::State& state) {
  const EncoderConfig cfg;
  EncoderParams enc = init_encoder(cfg);
  ActionHeadParams head = init_action_head(cfg.embed_dim, kActionDim, 2);
  ProjectorParams proj = init_projector(cfg.embed_dim, 3);
  const Tensor patches = normal({8 * 16, 192}, 5), teacher = normal({8 * 16, 32}, 6), gt = normal({8, 4}, 7);
  for (auto _ : state) {
    ad::Tape tape;
    ad::Var tokens = student_tokens_on_tape(tape, enc, tape.constant(patches));
    ad::Var la = action_loss(action_head_forward(tape, head, tokens, 16), tape.constant(gt));
    ad::Var lg = align_loss(project(tape, proj, tokens), tape.constant(teacher));
    tape.backward(vega_loss(la, lg, AlignmentConfig{}));
  }
}
BENCHMARK(BM_TrainStep);

void BM_RenderRgb(benchmark::State& state) {
  const SceneSpec s = generate_scene(1, Difficulty::hard);
  for (auto _ : state) benchmark::DoNotOptimize(render_rgb(s, s.cameras[1]).values().data());
}
BENCHMARK(BM_RenderRgb);

void BM_RenderFeatureMap(benchmark::State& state) {
  const SceneSpec s = generate_scene(1, Difficulty::hard);
  const FeatureField f = build_feature_field(s, 3, 32);
  for (auto _ : state) benchmark::DoNotOptimize(render_feature_map(f, s.cameras[0], 16).features.values().data());
}
BENCHMARK(BM_RenderFeatureMap);

void BM_Pca(benchmark::State& state) {
  const Tensor x = normal({16, 32}, 8);
  for (auto _ : state) benchmark::DoNotOptimize(pca(x, 3).eigenvalues.data());
}
BENCHMARK(BM_Pca);

void BM_Kmeans(benchmark::State& state) {
  const Tensor x = normal({16, 32}, 9);
  for (auto _ : state) benchmark::DoNotOptimize(kmeans(x, 5, 0).labels.data());
}
BENCHMARK(BM_Kmeans);

void BM_Ari(benchmark::State& state) {
  Rng rng(10);
  std::vector<int> a(200), b(200);
  for (std::size_t i = 0; i < 200; ++i) {
    a[i] = static_cast<int>(rng.below(5));
    b[i] = static_cast<int>(rng.below(5));
  }
  for (auto _ : state) benchmark::DoNotOptimize(ari(a, b));
}
BENCHMARK(BM_Ari);

}  // namespace

BENCHMARK_MAIN();
