#include <benchmark/benchmark.h>

#include "preictal/fft.hpp"
#include "preictal/rng.hpp"

namespace {

static void BM_Fft256(benchmark::State& state) {
    preictal::Rng rng(1);
    std::vector<double> frame(256);
    for (double& v : frame) v = rng.normal();
    const preictal::Fft fft(256);
    for (auto _ : state) {
        auto mag = fft.magnitude(frame);
        benchmark::DoNotOptimize(mag.data());
    }
}
BENCHMARK(BM_Fft256);

static void BM_FftPlan(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        preictal::Fft fft(n);
        benchmark::DoNotOptimize(&fft);
    }
}
BENCHMARK(BM_FftPlan)->Arg(256)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
