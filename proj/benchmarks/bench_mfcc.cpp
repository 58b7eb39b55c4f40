#include <benchmark/benchmark.h>

#include "preictal/mfcc.hpp"
#include "preictal/rng.hpp"

namespace {

static void BM_FeaturizeSegment(benchmark::State& state) {
    preictal::Rng rng(2);
    preictal::LabeledSegment seg;
    seg.subject_id = "bench";
    seg.data.assign(19, std::vector<double>(1280));
    for (auto& row : seg.data)
        for (double& v : row) v = rng.normal() * 20.0;
    preictal::MfccConfig cfg;
    const auto fb = preictal::build_mel_filterbank(cfg, 256);
    for (auto _ : state) {
        auto t = preictal::featurize_segment(seg, cfg, 256, fb);
        benchmark::DoNotOptimize(t.values.data());
    }
}
BENCHMARK(BM_FeaturizeSegment);

}  // namespace
