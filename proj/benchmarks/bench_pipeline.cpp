#include <benchmark/benchmark.h>

#include "cystseg/denoise.hpp"
#include "cystseg/layers.hpp"
#include "cystseg/mser.hpp"
#include "cystseg/phantom.hpp"
#include "cystseg/pipeline.hpp"

using namespace cystseg;

namespace {

const Phantom& phantom() {
  static const Phantom ph = [] {
    PhantomSpec spec;
    spec.n_slices = 1;
    spec.speckle_sigma = 0.2;
    spec.seed = 3;
    return generate_phantom(spec);
  }();
  return ph;
}

const Slice& denoised() {
  static const Slice s = tv_denoise(phantom().volume.slices[0]);
  return s;
}

void BM_TvDenoise(benchmark::State& state) {
  const Slice& f = phantom().volume.slices[0];
  for (auto _ : state) benchmark::DoNotOptimize(tv_denoise(f));
}
BENCHMARK(BM_TvDenoise)->Unit(benchmark::kMillisecond);

void BM_SegmentLayers(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(segment_layers(denoised()));
}
BENCHMARK(BM_SegmentLayers)->Unit(benchmark::kMillisecond);

void BM_DetectMser(benchmark::State& state) {
  const BinaryMask roi = roi_mask(segment_layers(denoised()), kNormalizedWidth, kNormalizedHeight);
  for (auto _ : state) benchmark::DoNotOptimize(detect_mser(denoised(), roi, MserParams{}));
}
BENCHMARK(BM_DetectMser)->Unit(benchmark::kMillisecond);

void BM_AnalyzeSlice(benchmark::State& state) {
  const PipelineConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(analyze_slice(phantom().volume.slices[0], cfg));
}
BENCHMARK(BM_AnalyzeSlice)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
