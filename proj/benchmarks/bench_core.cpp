#include <benchmark/benchmark.h>

#include <nlohmann/json.hpp>

#include "ptseg/interaction.hpp"
#include "ptseg/metrics.hpp"
#include "ptseg/pipeline.hpp"
#include "ptseg/sampling.hpp"
#include "ptseg/synthetic.hpp"
#include "ptseg/wire.hpp"

using namespace ptseg;

namespace {

BinaryMask disk(int size, double r) {
  BinaryMask m(size, size);
  const double c = size / 2.0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double dx = x + 0.5 - c;
      const double dy = y + 0.5 - c;
      if (dx * dx + dy * dy <= r * r) m.set(x, y);
    }
  }
  return m;
}

void BM_KMedoids(benchmark::State& state) {
  const auto mask = disk(static_cast<int>(state.range(0)), state.range(0) * 0.4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_kmedoids({mask, nullptr, 8, 1}));
  }
  state.counters["pixels"] = static_cast<double>(mask.area());
}
BENCHMARK(BM_KMedoids)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_ShiTomasi(benchmark::State& state) {
  const auto spec = suite_scene(0);
  const auto video = render(spec);
  const auto& mask = video.ground_truth.begin()->second[0];
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_shi_tomasi({mask, &video.frames[0], 8, 1}));
  }
}
BENCHMARK(BM_ShiTomasi)->Unit(benchmark::kMicrosecond);

void BM_DistanceTransform(benchmark::State& state) {
  const auto mask = disk(static_cast<int>(state.range(0)), state.range(0) * 0.4);
  for (auto _ : state) benchmark::DoNotOptimize(distance_to_outside(mask));
}
BENCHMARK(BM_DistanceTransform)->Arg(128)->Arg(512)->Unit(benchmark::kMicrosecond);

void BM_ContourF(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto a = disk(size, size * 0.3);
  const auto b = disk(size, size * 0.32);
  for (auto _ : state) benchmark::DoNotOptimize(contour_f(a, b));
}
BENCHMARK(BM_ContourF)->Arg(128)->Arg(480)->Unit(benchmark::kMicrosecond);

void BM_TwoPass(benchmark::State& state) {
  const auto spec = suite_scene(1);
  const auto video = render(spec);
  OracleSegmenter segmenter(spec);
  const auto& [id, gt] = *video.ground_truth.begin();
  PipelineConfig config;
  config.refinement_iterations = static_cast<int>(state.range(0));
  const auto points = sample_query_points(gt[0], video.frames[0], id, config, 0);
  const std::vector<double> occlusion(points.size(), 0.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(two_pass_segment(segmenter, video.frames[0], points, occlusion, config));
  }
}
BENCHMARK(BM_TwoPass)->Arg(0)->Arg(12)->Unit(benchmark::kMicrosecond);

void BM_PipelineSuiteScene(benchmark::State& state) {
  const auto spec = suite_scene(2);
  const auto video = render(spec);
  std::vector<ObjectPrompt> prompts;
  for (const auto& [id, gt] : video.ground_truth) prompts.push_back({id, 0, gt[0], {}});
  for (auto _ : state) {
    OracleTracker tracker(spec);
    OracleSegmenter segmenter(spec);
    benchmark::DoNotOptimize(run_pipeline(video, prompts, PipelineConfig{}, tracker, segmenter));
  }
}
BENCHMARK(BM_PipelineSuiteScene)->Unit(benchmark::kMillisecond);

void BM_WireFrameCodec(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const auto frame = Frame::filled(0, size, size, {40, 80, 120});
  for (auto _ : state) {
    const auto text = wire::encode_frame(frame).dump();
    benchmark::DoNotOptimize(wire::decode_frame(nlohmann::json::parse(text)));
  }
  state.SetBytesProcessed(state.iterations() * size * size * 3);
}
BENCHMARK(BM_WireFrameCodec)->Arg(128)->Arg(480)->Unit(benchmark::kMicrosecond);

void BM_MaskCodec(benchmark::State& state) {
  const auto mask = disk(480, 150);
  for (auto _ : state) {
    const auto text = wire::encode_mask(mask).dump();
    benchmark::DoNotOptimize(wire::decode_mask(nlohmann::json::parse(text)));
  }
}
BENCHMARK(BM_MaskCodec)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
