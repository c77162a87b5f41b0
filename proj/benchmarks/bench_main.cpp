#include <benchmark/benchmark.h>

#include "coin/geometry.hpp"
#include "coin/scoring.hpp"
#include "coin/segmenter.hpp"
#include "coin/synth.hpp"

namespace coin {
namespace {

// A 640x480 frame pair with the object moved and tilted between them.
struct ScoreFixture {
  ScoreFixture() {
    SceneSpec spec;
    spec.frames = 2;
    spec.outline.rx = spec.outline.ry = 60.0;
    spec.keyframes = {{0, {0, 0, 0}, {0, 0, 800}}, {1, {0.1, 0.2, 0.1}, {8, -5, 810}}};
    const SceneRenderer r(spec);
    const SynthFrame f0 = r.render(0), f1 = r.render(1);
    tmpl_gray = to_gray(f0.image);
    tmpl_mask = object_mask(f0.labels);
    frame_gray = to_gray(f1.image);
    seg = object_mask(f1.labels);
    pose = r.inter_frame(0, 1);
    ctx.frame_gray = &frame_gray;
    ctx.segmentation = &seg;
    ctx.template_gray = &tmpl_gray;
    ctx.template_mask = &tmpl_mask;
    ctx.prev_visibility = &tmpl_mask;
  }
  Image tmpl_gray, frame_gray;
  BinaryMask tmpl_mask, seg;
  Homography pose;
  ScoringContext ctx;
};

const ScoreFixture& fixture() {
  static const ScoreFixture f;
  return f;
}

void BM_ScoreReference(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(score(f.ctx, f.pose));
}
BENCHMARK(BM_ScoreReference)->Unit(benchmark::kMicrosecond);

void BM_ScorerFast(benchmark::State& state) {
  const auto& f = fixture();
  const Scorer scorer(f.ctx);
  for (auto _ : state) benchmark::DoNotOptimize(scorer(f.pose));
}
BENCHMARK(BM_ScorerFast)->Unit(benchmark::kMicrosecond);

void BM_WarpMask(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(warp_mask(f.pose, f.tmpl_mask, 640, 480));
}
BENCHMARK(BM_WarpMask)->Unit(benchmark::kMicrosecond);

// One 160x120 grid (a 640x480 frame at stride 4) against an index of
// state.range(0) examples.
void BM_Classify(benchmark::State& state) {
  const int dim = 8;
  RandomSource rng(1);
  std::vector<float> vectors;
  std::vector<Label> labels;
  for (int i = 0; i < state.range(0); ++i) {
    for (int d = 0; d < dim; ++d) vectors.push_back(float(rng.uniform(-1.0, 1.0)));
    labels.push_back(static_cast<Label>(rng.uniform_int(0, 2)));
  }
  ExampleIndex index(dim);
  index.add(vectors, labels);
  EmbeddingGrid grid;
  grid.dim = dim;
  grid.cols = 160;
  grid.rows = 120;
  for (int i = 0; i < grid.cols * grid.rows * dim; ++i) grid.values.push_back(float(rng.uniform(-1.0, 1.0)));
  for (auto _ : state) benchmark::DoNotOptimize(classify(grid, index, 5));
  state.SetItemsProcessed(state.iterations() * grid.cols * grid.rows);
}
BENCHMARK(BM_Classify)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace coin

BENCHMARK_MAIN();
