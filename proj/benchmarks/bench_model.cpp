#include <benchmark/benchmark.h>

#include "preictal/model.hpp"
#include "preictal/optim.hpp"

namespace {

preictal::Tensor random_batch(int n, preictal::Rng& rng) {
    preictal::Tensor t({n, 19, 20, 11});
    for (double& v : t.vec()) v = rng.normal();
    return t;
}

static void BM_ForwardEval(benchmark::State& state) {
    preictal::ModelConfig cfg;
    auto model = preictal::SeizurePredictor::init(cfg, 3);
    preictal::Rng rng(4);
    const auto batch = random_batch(static_cast<int>(state.range(0)), rng);
    for (auto _ : state) {
        auto p = model.predict(batch);
        benchmark::DoNotOptimize(p.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardEval)->Arg(32)->Arg(256);

static void BM_TrainStep(benchmark::State& state) {
    preictal::ModelConfig cfg;
    cfg.dropout_p = 0.3;
    auto model = preictal::SeizurePredictor::init(cfg, 3);
    preictal::Rng rng(4);
    const int n = static_cast<int>(state.range(0));
    const auto batch = random_batch(n, rng);
    preictal::Tensor labels({n});
    for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i % 2;
    preictal::Adam opt(model.parameters(), {4e-4, 0.9, 0.999, 1e-8, 5e-3});
    preictal::Rng dropout_rng(9);
    for (auto _ : state) {
        preictal::SeizurePredictor::ForwardOptions fo;
        fo.mode = preictal::Mode::train;
        fo.rng = &dropout_rng;
        auto p = model.forward(preictal::constant(batch), fo);
        auto loss = preictal::weighted_bce(p, labels, 0.52);
        opt.zero_grad();
        preictal::backward(loss);
        opt.step();
        benchmark::DoNotOptimize(loss.value()[0]);
    }
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_TrainStep)->Arg(64);

}  // namespace
