#include <benchmark/benchmark.h>

#include <cmath>

#include "preictal/filters.hpp"

namespace {

static void BM_DesignBandpass(benchmark::State& state) {
    for (auto _ : state) {
        auto c = preictal::design_butterworth(preictal::BandKind::bandpass, 0.1, 70.0, 4, 256);
        benchmark::DoNotOptimize(&c);
    }
}
BENCHMARK(BM_DesignBandpass);

static void BM_ZeroPhaseMinute(benchmark::State& state) {
    const auto c = preictal::design_butterworth(preictal::BandKind::bandpass, 0.1, 70.0, 4, 256);
    std::vector<double> x(256 * 60);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.07 * static_cast<double>(i));
    for (auto _ : state) {
        auto y = preictal::apply_zero_phase(c, x);
        benchmark::DoNotOptimize(y.data());
    }
}
BENCHMARK(BM_ZeroPhaseMinute);

}  // namespace
