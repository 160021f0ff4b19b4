#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "cova/blobnet.hpp"
#include "cova/features.hpp"
#include "cova/metadata.hpp"
#include "cova/mog.hpp"
#include "cova/scene.hpp"
#include "cova/selection.hpp"
#include "cova/tracking.hpp"

using namespace cova;

namespace {

/// A short slice of the reference scene, shared by the stream benchmarks.
struct Stream {
  Scene scene;
  MetadataStream meta;
};

const Stream& sample_stream() {
  static const Stream s = [] {
    SceneConfig c = scene_preset("sparse");
    c.num_frames = 400;
    Stream out{generate_scene(c), {}};
    out.meta = encode_metadata(out.scene);
    return out;
  }();
  return s;
}

BinaryGrid random_bitmap(std::mt19937_64& rng, int rows, int cols, double density) {
  BinaryGrid g(rows, cols);
  std::bernoulli_distribution on(density);
  for (auto& v : g.data) v = on(rng);
  return g;
}

}  // namespace

static void BM_BlobNetForward(benchmark::State& state) {
  const auto& s = sample_stream();
  const BlobNetModel model = BlobNetModel::random({}, 1);
  const auto window = window_ending_at(s.meta.frames, 100, model.arch().temporal_depth);
  const auto x = build_features(window, model.embedding());
  for (auto _ : state) benchmark::DoNotOptimize(blobnet_forward(model, x));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_BlobNetForward)->Unit(benchmark::kMicrosecond);

static void BM_ConnectedComponents(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto g = random_bitmap(rng, 22, 40, static_cast<double>(state.range(0)) / 100.0);
  for (auto _ : state) benchmark::DoNotOptimize(connected_components(g, 0, 2));
}
BENCHMARK(BM_ConnectedComponents)->Arg(5)->Arg(30)->Unit(benchmark::kMicrosecond);

static void BM_Hungarian(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Grid<double> cost(n, n);
  for (auto& v : cost.data) v = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(hungarian(cost));
}
BENCHMARK(BM_Hungarian)->Arg(4)->Arg(16)->Arg(64)->Unit(benchmark::kMicrosecond);

static void BM_SortTracker(benchmark::State& state) {
  // Four boxes drifting right, one frame per step.
  std::vector<std::vector<Blob>> frames(200);
  for (int t = 0; t < 200; ++t)
    for (int k = 0; k < 4; ++k) {
      Blob b;
      b.frame_index = t;
      b.bbox_px = Box{2.0 * t, 64.0 * k + 8, 48, 32};
      b.bbox_mb = Box{b.bbox_px.x / 16, b.bbox_px.y / 16, 3, 2};
      b.cells = 6;
      frames[static_cast<std::size_t>(t)].push_back(b);
    }
  for (auto _ : state) {
    SortTracker tracker;
    for (int t = 0; t < 200; ++t) tracker.step(t, frames[static_cast<std::size_t>(t)]);
    benchmark::DoNotOptimize(tracker.finish());
  }
  state.SetItemsProcessed(state.iterations() * 200);
}
BENCHMARK(BM_SortTracker)->Unit(benchmark::kMicrosecond);

static void BM_SelectAnchors(benchmark::State& state) {
  const auto& s = sample_stream();
  const auto gops = split_gops(s.meta);
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> frame(0, static_cast<int>(s.meta.frames.size()) - 1);
  std::vector<Track> tracks;
  for (int i = 0; i < 64; ++i) {
    int a = frame(rng), b = frame(rng);
    if (a > b) std::swap(a, b);
    Track t;
    t.track_id = i;
    t.start_frame = a;
    t.end_frame = b;
    t.boxes.assign(static_cast<std::size_t>(b - a + 1), Box{0, 0, 16, 16});
    tracks.push_back(std::move(t));
  }
  for (auto _ : state) {
    auto copy = tracks;
    benchmark::DoNotOptimize(select_all(gops, copy));
  }
}
BENCHMARK(BM_SelectAnchors)->Unit(benchmark::kMicrosecond);

static void BM_MogStep(benchmark::State& state) {
  const auto& s = sample_stream();
  MogState mog(s.scene.config.width_px, s.scene.config.height_px);
  std::vector<GrayFrame> frames;
  for (int t = 0; t < 8; ++t) frames.push_back(render_frame(s.scene, t));
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(mog.step(frames[i++ % frames.size()]));
}
BENCHMARK(BM_MogStep)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
