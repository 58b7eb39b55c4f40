#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "preictal/model.hpp"

using namespace preictal;

namespace {

Tensor random_batch(int n, const ModelConfig& cfg, Rng& rng, double scale = 1.0) {
    Tensor t({n, cfg.in_channels, cfg.input_h, cfg.input_w});
    for (double& v : t.vec()) v = rng.normal() * scale;
    return t;
}

// learnable parameter count from the architecture arithmetic alone
std::size_t expected_param_count(const ModelConfig& c) {
    std::size_t total = 0;
    int cin = c.in_channels;
    for (int i = 0; i < 3; ++i) {
        const int cout = c.conv_channels[i];
        total += static_cast<std::size_t>(cout) * cin * c.kernel_h * c.kernel_w + cout;  // conv
        total += 2 * static_cast<std::size_t>(cout);                                     // bn
        cin = cout;
    }
    const int cc = c.conv_channels[2];
    const int cr = cc / c.se_reduction;
    if (c.use_attention) total += static_cast<std::size_t>(cc) * cr + cr + static_cast<std::size_t>(cr) * cc + cc;
    int h = c.input_h, w = c.input_w;
    for (int i = 0; i < 3; ++i) {
        h /= 2;
        w /= 2;
    }
    total += static_cast<std::size_t>(cc) * h * w * c.dense_units + c.dense_units;
    total += static_cast<std::size_t>(c.dense_units) + 1;
    return total;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("parameter count sits in the 55k-90k band") {
    ModelConfig cfg;
    SeizurePredictor m(cfg);
    CHECK(m.param_count() == expected_param_count(cfg));
    CHECK(m.param_count() >= 55000);
    CHECK(m.param_count() <= 90000);
}

TEST_CASE("init is deterministic and He-scaled") {
    ModelConfig cfg;
    SeizurePredictor a = SeizurePredictor::init(cfg, 42);
    SeizurePredictor b = SeizurePredictor::init(cfg, 42);
    for (std::size_t i = 0; i < a.parameters().size(); ++i)
        CHECK(a.parameters()[i].value().vec() == b.parameters()[i].value().vec());

    // dense weight: fan_in 256, empirical variance within 20% of 2/fan_in
    Var* w = a.find_parameter("dense.w");
    REQUIRE(w != nullptr);
    const auto& v = w->value().vec();
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    const double fan_in = static_cast<double>(w->value().dim(0));
    CHECK(var == doctest::Approx(2.0 / fan_in).epsilon(0.2));
}

TEST_CASE("forward emits probabilities with the documented spatial trajectory") {
    ModelConfig cfg;
    SeizurePredictor m = SeizurePredictor::init(cfg, 7);
    Rng rng(3);
    const Tensor batch = random_batch(4, cfg, rng);
    const std::vector<double> p = m.predict(batch);
    REQUIRE(p.size() == 4);
    for (double v : p) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
    // flatten size 128 * 2 * 1 = 256 implies the (20,11)->(10,5)->(5,2)->(2,1) chain
    CHECK(m.find_parameter("dense.w")->value().dim(0) == 256);

    // eval mode is bitwise deterministic
    CHECK(m.predict(batch) == p);
}

TEST_CASE("forward output stays finite over randomized batches") {
    ModelConfig cfg;
    SeizurePredictor m = SeizurePredictor::init(cfg, 11);
    Rng rng(4);
    for (int trial = 0; trial < 3; ++trial) {
        const std::vector<double> p = m.predict(random_batch(8, cfg, rng, 50.0));
        for (double v : p) CHECK(std::isfinite(v));
    }
}

TEST_CASE("forward rejects wrong shapes") {
    ModelConfig cfg;
    SeizurePredictor m = SeizurePredictor::init(cfg, 7);
    CHECK_THROWS_AS(m.predict(Tensor::zeros({2, 5, 20, 11})), ShapeError);
    CHECK_THROWS_AS(m.predict(Tensor::zeros({2, 19, 21, 11})), ShapeError);
}

TEST_CASE("se attention weights lie in (0,1) and pinning reproduces the ablation") {
    ModelConfig with;
    SeizurePredictor attn = SeizurePredictor::init(with, 123);

    ModelConfig without = with;
    without.use_attention = false;
    SeizurePredictor ablation(without);
    // share every non-SE parameter
    for (std::size_t i = 0; i < ablation.parameters().size(); ++i) {
        const std::string& name = ablation.parameter_names()[i];
        ablation.parameters()[i].value_mut() = attn.find_parameter(name)->value();
    }
    for (std::size_t i = 0; i < ablation.bn_states().size(); ++i)
        ablation.bn_states()[i] = attn.bn_states()[i];

    Rng rng(5);
    const Tensor batch = random_batch(3, with, rng);

    Tensor s;
    SeizurePredictor::ForwardOptions opt;
    opt.attention_out = &s;
    const Var p_attn = attn.forward(constant(batch), opt);
    REQUIRE(s.size() == 3 * 128);
    for (double v : s.vec()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }

    opt.pin_attention_ones = true;
    const Var p_pinned = attn.forward(constant(batch), opt);
    const Var p_ablation = ablation.forward(constant(batch));
    CHECK(p_pinned.value().vec() == p_ablation.value().vec());  // bit-exact
}

TEST_CASE("classification threshold is inclusive at one half") {
    ModelConfig cfg;
    SeizurePredictor m(cfg);  // all-zero weights: logits exactly 0, p exactly 0.5
    Rng rng(6);
    const Tensor batch = random_batch(3, cfg, rng);
    const std::vector<double> p = m.predict(batch);
    for (double v : p) CHECK(v == 0.5);
    for (int label : m.classify(batch)) CHECK(label == 1);

    // pushing the output bias below zero flips the decision
    m.find_parameter("out.b")->value_mut()[0] = std::log(0.49 / 0.51);
    for (double v : m.predict(batch)) CHECK(v == doctest::Approx(0.49));
    for (int label : m.classify(batch)) CHECK(label == 0);
}

TEST_CASE("raising the output bias never flips a positive to negative") {
    ModelConfig cfg;
    SeizurePredictor m = SeizurePredictor::init(cfg, 31);
    Rng rng(7);
    const Tensor batch = random_batch(6, cfg, rng);
    const std::vector<int> before = m.classify(batch);
    m.find_parameter("out.b")->value_mut()[0] += 1.5;
    const std::vector<int> after = m.classify(batch);
    for (std::size_t i = 0; i < before.size(); ++i)
        if (before[i] == 1) CHECK(after[i] == 1);
}

TEST_CASE("checkpoint round trip is bit-exact") {
    ModelConfig cfg;
    SeizurePredictor m = SeizurePredictor::init(cfg, 99);
    m.step = 1234;
    Rng rng(8);
    const Tensor batch = random_batch(2, cfg, rng);
    const std::vector<double> before = m.predict(batch);

    const std::string path =
        (std::filesystem::temp_directory_path() / "preictal_test_model.ckpt").string();
    save_checkpoint(m, path);
    SeizurePredictor loaded = load_checkpoint(path);
    CHECK(loaded.step == 1234);
    CHECK(loaded.config() == cfg);
    CHECK(loaded.predict(batch) == before);
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint rejects corruption, truncation and mismatched shapes") {
    ModelConfig cfg;
    SeizurePredictor m = SeizurePredictor::init(cfg, 99);
    const std::string path =
        (std::filesystem::temp_directory_path() / "preictal_test_model2.ckpt").string();
    save_checkpoint(m, path);

    SUBCASE("corrupt magic") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("BOGUS!!!", 8);
        f.close();
        CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    }
    SUBCASE("truncated file") {
        const auto size = std::filesystem::file_size(path);
        std::filesystem::resize_file(path, size / 2);
        CHECK_THROWS_AS(load_checkpoint(path), FormatError);
    }
    SUBCASE("cross-config shape table") {
        // rewrite the header's dense_units so blob shapes no longer match
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(8 + 4 + 4 * 4 + 4 + 4 + 8 + 4);  // through se_reduction
        const std::int32_t dense = 64;
        f.write(reinterpret_cast<const char*>(&dense), 4);
        f.close();
        CHECK_THROWS_AS(load_checkpoint(path), VersionError);
    }
    std::filesystem::remove(path);
}

}  // TEST_SUITE
