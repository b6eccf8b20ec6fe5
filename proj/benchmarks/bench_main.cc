#include <benchmark/benchmark.h>

#include "zeroforge/binarization.h"
#include "zeroforge/config.h"
#include "zeroforge/encoder.h"
#include "zeroforge/generator.h"
#include "zeroforge/objectives.h"
#include "zeroforge/renderer.h"
#include "zeroforge/rng.h"
#include "zeroforge/trainer.h"

namespace zeroforge {
namespace {

VoxelGrid RandomGrid(int n) {
  std::mt19937_64 rng(1);
  VoxelGrid g(n);
  for (double& v : g.values) v = UniformUnit(rng);
  return g;
}

EmbeddingBatch RandomBatch(int rows, int width) {
  std::mt19937_64 rng(2);
  EmbeddingBatch b(rows, width);
  for (double& v : b.mutable_values()) v = StandardNormal(rng);
  b.Normalize();
  return b;
}

// Args: grid resolution, image size.
void BM_Render(benchmark::State& state) {
  const VoxelGrid g = RandomGrid(static_cast<int>(state.range(0)));
  RenderConfig rc;
  rc.image_size = static_cast<int>(state.range(1));
  const CameraPose pose{0.7, 1.1};
  for (auto _ : state) benchmark::DoNotOptimize(Render(g, pose, rc));
}
BENCHMARK(BM_Render)->Args({16, 32})->Args({32, 64})->Args({32, 224})->Unit(benchmark::kMillisecond);

void BM_RenderBackward(benchmark::State& state) {
  const VoxelGrid g = RandomGrid(static_cast<int>(state.range(0)));
  RenderConfig rc;
  rc.image_size = static_cast<int>(state.range(1));
  const CameraPose pose{0.7, 1.1};
  const Image grad(rc.image_size, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(RenderBackward(g, pose, rc, grad));
}
BENCHMARK(BM_RenderBackward)->Args({16, 32})->Args({32, 64})->Unit(benchmark::kMillisecond);

void BM_BinarizeSoft(benchmark::State& state) {
  const VoxelGrid g = RandomGrid(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(BinarizeSoft(g, BinarizationParams{}));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(g.size()));
}
BENCHMARK(BM_BinarizeSoft)->Arg(32)->Arg(64);

// Args: decoder resolution, channels.
void BM_DecoderForward(benchmark::State& state) {
  DecoderConfig dc;
  dc.num_blocks = 2;
  dc.resolution = static_cast<int>(state.range(0));
  dc.channels = static_cast<int>(state.range(1));
  dc.latent_dim = 16;
  OccupancyDecoder decoder(dc);
  std::mt19937_64 rng(3);
  decoder.Init(rng, 0.05);
  const Matrix z = Matrix::Random(1, dc.latent_dim);
  for (auto _ : state) benchmark::DoNotOptimize(decoder.Decode(z));
}
BENCHMARK(BM_DecoderForward)->Args({16, 8})->Args({32, 8})->Args({32, 32})->Unit(benchmark::kMillisecond);

// Published flow width: 5 couplings, hidden 1024, latent 128, condition 512.
void BM_FlowInverse(benchmark::State& state) {
  LatentFlow flow(FlowConfig{});
  std::mt19937_64 rng(4);
  flow.Init(rng);
  const int rows = static_cast<int>(state.range(0));
  const Matrix u = Matrix::Random(rows, 128);
  const EmbeddingBatch c = RandomBatch(rows, 512);
  for (auto _ : state) benchmark::DoNotOptimize(flow.Inverse(u, c));
}
BENCHMARK(BM_FlowInverse)->Arg(1)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_ContrastiveLoss(benchmark::State& state) {
  const int b = static_cast<int>(state.range(0));
  const EmbeddingBatch img = RandomBatch(b, 512), txt = RandomBatch(b, 512);
  EmbeddingBatch grad;
  for (auto _ : state) benchmark::DoNotOptimize(ContrastiveLoss(img, txt, 50.0, &grad));
}
BENCHMARK(BM_ContrastiveLoss)->Arg(8)->Arg(64);

// One optimizer step of the smoke setup (2 prompts, 3 views, 16^3).
void BM_TrainStep(benchmark::State& state) {
  RunConfig cfg = ParseRunConfig(
      "encoder.image_resolution = 32\n"
      "flow.num_coupling_blocks = 2\nflow.hidden_width = 64\nflow.latent_dim = 16\n"
      "decoder.num_blocks = 2\ndecoder.resolution = 16\ndecoder.channels = 8\n"
      "render.image_size = 32\ntrain.init = random\ntrain.lr = 1e-3\n");
  QuerySet queries = ParseQueries("a wooden chair\na round table\n");
  auto encoder = MakeEncoder(cfg.encoder);
  BuiltinRenderer renderer(cfg.render);
  Trainer trainer(cfg, queries, *encoder, renderer, BuildGenerator(cfg, encoder->spec().embedding_width));
  long it = 0;
  for (auto _ : state) benchmark::DoNotOptimize(trainer.Step(it++));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace zeroforge

BENCHMARK_MAIN();
