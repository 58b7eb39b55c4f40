// Acceptance suite: one pass/fail line per criterion, exit code = number of
// failures. Heavy end-to-end checks run on synthetic data; `--helsinki <dir>`
// additionally runs the real-data pipeline and prints (but never gates on) a
// comparison against the reference 10-fold numbers.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "../tests/fixtures.hpp"
#include "preictal/autodiff.hpp"
#include "preictal/explain.hpp"
#include "preictal/filters.hpp"
#include "preictal/mfcc.hpp"
#include "preictal/model.hpp"
#include "preictal/pipeline.hpp"
#include "preictal/shapley.hpp"
#include "preictal/training.hpp"

using namespace preictal;
namespace fs = std::filesystem;

namespace {

struct Check {
    int failures = 0;
    void expect(bool ok, const std::string& what) {
        if (!ok) {
            ++failures;
            std::cout << "    FAILED: " << what << "\n";
        }
    }
};

constexpr double kPi = 3.141592653589793238462643383279502884;

std::vector<double> sine(double freq, int fs, double seconds) {
    std::vector<double> x(static_cast<std::size_t>(seconds * fs));
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::sin(2.0 * kPi * freq * static_cast<double>(i) / fs);
    return x;
}

double rms(const std::vector<double>& x) {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return std::sqrt(acc / static_cast<double>(x.size()));
}

// ---------------------------------------------------------------------------
// criterion 1: filter fidelity

bool criterion_filters() {
    Check c;
    const BiquadCascade bp = design_butterworth(BandKind::bandpass, 0.1, 70.0, 4, 256);
    c.expect(std::fabs(bp.magnitude_db(0.1) + 3.0103) <= 0.1,
             "bandpass edge 0.1 Hz within -3.01 +- 0.1 dB, got " +
                 std::to_string(bp.magnitude_db(0.1)));
    c.expect(std::fabs(bp.magnitude_db(70.0) + 3.0103) <= 0.1,
             "bandpass edge 70 Hz within -3.01 +- 0.1 dB, got " +
                 std::to_string(bp.magnitude_db(70.0)));

    const BiquadCascade notch = design_butterworth(BandKind::bandstop, 49.0, 51.0, 4, 256);
    c.expect(notch.magnitude_db(50.0) <= -40.0,
             "notch transfer function at 50 Hz <= -40 dB, got " +
                 std::to_string(notch.magnitude_db(50.0)));
    // finite-tone edge wavelets fall outside the stopband, so the tone must
    // be long for the measurement to reflect the filter rather than the window
    const std::vector<double> tone = sine(50.0, 256, 1200.0);
    const double attenuation_db =
        -20.0 * std::log10(rms(apply_zero_phase(notch, tone)) / rms(tone));
    c.expect(attenuation_db >= 40.0, "zero-phase 50 Hz tone attenuation >= 40 dB, got " +
                                         std::to_string(attenuation_db) + " dB");
    return c.failures == 0;
}

// ---------------------------------------------------------------------------
// criterion 2: MFCC contract against the independent reference pipeline

std::vector<double> direct_dft_magnitude(const std::vector<double>& frame) {
    const std::size_t n = frame.size();
    std::vector<double> mag(n / 2 + 1);
    for (std::size_t k = 0; k <= n / 2; ++k) {
        double re = 0.0, im = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = -2.0 * kPi * static_cast<double>(k * i) / static_cast<double>(n);
            re += frame[i] * std::cos(a);
            im += frame[i] * std::sin(a);
        }
        mag[k] = std::sqrt(re * re + im * im);
    }
    return mag;
}

std::vector<std::vector<double>> reference_mfcc(const std::vector<double>& x,
                                                const MfccConfig& cfg, int fs) {
    auto mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
    auto mel_inv = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
    auto reflect = [&](long i) {
        const long last = static_cast<long>(x.size()) - 1;
        if (i < 0) i = -i;
        if (i > last) i = 2 * last - i;
        return x[static_cast<std::size_t>(i)];
    };
    const int n_frames = 1 + static_cast<int>(x.size()) / cfg.hop;
    std::vector<double> pts(cfg.n_mels + 2);
    for (int i = 0; i < cfg.n_mels + 2; ++i)
        pts[i] = mel_inv(mel(cfg.fmin) + (mel(cfg.fmax) - mel(cfg.fmin)) * i / (cfg.n_mels + 1));

    std::vector<std::vector<double>> out(cfg.n_mfcc, std::vector<double>(n_frames));
    for (int t = 0; t < n_frames; ++t) {
        std::vector<double> frame(cfg.frame_len);
        for (int k = 0; k < cfg.frame_len; ++k)
            frame[k] = reflect(static_cast<long>(t) * cfg.hop - cfg.frame_len / 2 + k) *
                       (0.54 - 0.46 * std::cos(2.0 * kPi * k / (cfg.frame_len - 1)));
        const auto mag = direct_dft_magnitude(frame);
        std::vector<double> loge(cfg.n_mels);
        for (int m = 0; m < cfg.n_mels; ++m) {
            double e = 0.0;
            for (std::size_t k = 0; k < mag.size(); ++k) {
                const double f = static_cast<double>(k) * fs / cfg.frame_len;
                double w = 0.0;
                if (f > pts[m] && f < pts[m + 1]) w = (f - pts[m]) / (pts[m + 1] - pts[m]);
                else if (f == pts[m + 1]) w = 1.0;
                else if (f > pts[m + 1] && f < pts[m + 2])
                    w = (pts[m + 2] - f) / (pts[m + 2] - pts[m + 1]);
                e += w * mag[k];
            }
            loge[m] = std::log(std::max(e, cfg.log_floor));
        }
        for (int k = 0; k < cfg.n_mfcc; ++k) {
            double acc = 0.0;
            for (int i = 0; i < cfg.n_mels; ++i)
                acc += loge[i] * std::cos(kPi * (2.0 * i + 1.0) * k / (2.0 * cfg.n_mels));
            out[k][t] = acc * (k == 0 ? std::sqrt(1.0 / cfg.n_mels) : std::sqrt(2.0 / cfg.n_mels));
        }
    }
    return out;
}

bool criterion_mfcc() {
    Check c;
    MfccConfig cfg;
    const MelFilterbank fb = build_mel_filterbank(cfg, 256);
    Rng rng(2026);
    double worst = 0.0;
    for (int seg = 0; seg < 100; ++seg) {
        LabeledSegment s;
        s.subject_id = "acc";
        s.data.assign(19, std::vector<double>(1280));
        for (auto& row : s.data)
            for (double& v : row) v = rng.normal() * 25.0;
        const MfccTensor t = featurize_segment(s, cfg, 256, fb);
        if (seg == 0)
            c.expect(t.n_channels == 19 && t.n_coeffs == 20 && t.n_frames == 11,
                     "tensor shape must be (19, 20, 11)");
        // reference on two channels per segment keeps the oracle cost sane
        for (std::size_t ch : {std::size_t{0}, std::size_t{18}}) {
            const auto want = reference_mfcc(s.data[ch], cfg, 256);
            double scale = 0.0, diff = 0.0;
            for (std::size_t m = 0; m < t.n_coeffs; ++m)
                for (std::size_t f = 0; f < t.n_frames; ++f) {
                    scale = std::max(scale, std::fabs(want[m][f]));
                    diff = std::max(diff, std::fabs(t.at(ch, m, f) - want[m][f]));
                }
            worst = std::max(worst, diff / std::max(scale, 1e-12));
        }
    }
    c.expect(worst <= 1e-6,
             "max relative error vs reference pipeline <= 1e-6, got " + std::to_string(worst));
    return c.failures == 0;
}

// ---------------------------------------------------------------------------
// criterion 3: autodiff soundness

Tensor randn(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.vec()) v = rng.normal() * scale;
    return t;
}

bool criterion_autodiff() {
    Check c;
    Rng rng(33);
    auto report = [&](const char* name, double err) {
        c.expect(err <= 1e-4, std::string(name) + " finite-difference rel err <= 1e-4, got " +
                                  std::to_string(err));
    };

    {
        const Var x = parameter(randn({2, 3, 6, 5}, rng));
        const Var w = parameter(randn({4, 3, 2, 2}, rng));
        const Var b = parameter(randn({4}, rng));
        report("conv2d", grad_check([&] { return sum(mul(conv2d(x, w, b, 1, 1),
                                                         conv2d(x, w, b, 1, 1))); },
                                    {x, w, b}));
    }
    {
        const Var x = parameter(randn({3, 2, 4, 4}, rng));
        const Var g = parameter(randn({2}, rng, 0.3));
        const Var b = parameter(randn({2}, rng, 0.3));
        report("batchnorm2d(train)", grad_check([&] {
            BatchNormState st(2);
            const Var y = batchnorm2d(x, g, b, st, Mode::train);
            return sum(mul(y, y));
        }, {x, g, b}));
        BatchNormState st_eval(2);
        report("batchnorm2d(eval)", grad_check([&] {
            const Var y = batchnorm2d(x, g, b, st_eval, Mode::eval);
            return sum(mul(y, y));
        }, {x, g, b}));
    }
    {
        Tensor xv = randn({40}, rng);
        for (double& v : xv.vec())
            if (std::fabs(v) < 0.1) v = 0.5;  // keep clear of the relu kink
        const Var x = parameter(xv);
        report("relu", grad_check([&] { return sum(mul(relu(x), relu(x))); }, {x}));
        report("sigmoid", grad_check([&] { return sum(mul(sigmoid(x), sigmoid(x))); }, {x}));
    }
    {
        const Var x = parameter(randn({2, 3, 6, 4}, rng));
        report("maxpool2d", grad_check([&] { return sum(mul(maxpool2d(x), maxpool2d(x))); }, {x}));
        report("global_avg_pool2d",
               grad_check([&] { return sum(mul(global_avg_pool2d(x), global_avg_pool2d(x))); }, {x}));
        report("crop2d", grad_check([&] { return sum(mul(crop2d(x, 5, 3), crop2d(x, 5, 3))); }, {x}));
    }
    {
        const Var x = parameter(randn({5, 4}, rng));
        const Var w = parameter(randn({4, 3}, rng));
        const Var b = parameter(randn({3}, rng));
        report("linear", grad_check([&] { return sum(mul(linear(x, w, b), linear(x, w, b))); },
                                    {x, w, b}));
    }
    {
        const Var x = parameter(randn({2, 3, 4, 2}, rng));
        const Var s = parameter(randn({2, 3}, rng));
        report("channelwise_mul",
               grad_check([&] { return sum(mul(channelwise_mul(x, s), channelwise_mul(x, s))); },
                          {x, s}));
    }
    {
        Tensor pv({8}), yv({8});
        for (std::size_t i = 0; i < 8; ++i) {
            pv[i] = 0.1 + 0.8 * rng.uniform();
            yv[i] = static_cast<double>(rng.uniform_int(2));
        }
        const Var p = parameter(pv);
        report("weighted_bce", grad_check([&] { return weighted_bce(p, yv, 0.52); }, {p}));
    }

    // full model, 64-bit, dropout off, 2-sample batch, sampled coordinates
    {
        ModelConfig cfg;
        cfg.dropout_p = 0.0;
        SeizurePredictor model = SeizurePredictor::init(cfg, 404);
        const Var batch = parameter(randn({2, 19, 20, 11}, rng));
        const Tensor labels({2}, {1.0, 0.0});
        auto loss = [&] {
            SeizurePredictor::ForwardOptions fo;
            fo.mode = Mode::train;
            const Var p = model.forward(batch, fo);
            return weighted_bce(p, labels, 0.52);
        };
        std::vector<Var> leaves = model.parameters();
        leaves.push_back(batch);
        GradCheckOptions opt;
        opt.max_coords_per_leaf = 5;
        opt.seed = 7;
        report("full model", grad_check(loss, leaves, opt));
    }
    return c.failures == 0;
}

// ---------------------------------------------------------------------------
// criterion 4: architecture conformance

bool criterion_architecture() {
    Check c;
    ModelConfig cfg;
    SeizurePredictor model = SeizurePredictor::init(cfg, 2024);
    c.expect(model.param_count() >= 55000 && model.param_count() <= 90000,
             "parameter count in [55k, 90k], got " + std::to_string(model.param_count()));

    // spatial trajectory via pooling arithmetic on the real input size
    Rng rng(1);
    Var h = constant(randn({1, 1, 20, 11}, rng));
    std::vector<std::vector<int>> shapes;
    for (int i = 0; i < 3; ++i) {
        h = maxpool2d(h);
        shapes.push_back({h.value().dim(2), h.value().dim(3)});
    }
    c.expect(shapes[0] == std::vector<int>{10, 5} && shapes[1] == std::vector<int>{5, 2} &&
                 shapes[2] == std::vector<int>{2, 1},
             "spatial trajectory (20,11)->(10,5)->(5,2)->(2,1)");
    c.expect(model.find_parameter("dense.w")->value().dim(0) == 256,
             "flattened feature size 128*2*1 = 256");

    const Tensor batch = randn({4, 19, 20, 11}, rng);
    Tensor s;
    SeizurePredictor::ForwardOptions opt;
    opt.attention_out = &s;
    const Var p = model.forward(constant(batch), opt);
    bool se_in_range = s.size() == 4 * 128;
    for (double v : s.vec()) se_in_range = se_in_range && v > 0.0 && v < 1.0;
    c.expect(se_in_range, "SE attention weights in (0,1)");
    bool probs = true;
    for (double v : p.value().vec()) probs = probs && v > 0.0 && v < 1.0;
    c.expect(probs, "output probabilities in (0,1)");

    // pinning s = 1 must reproduce the no-attention ablation exactly
    ModelConfig ab_cfg = cfg;
    ab_cfg.use_attention = false;
    SeizurePredictor ablation(ab_cfg);
    for (std::size_t i = 0; i < ablation.parameters().size(); ++i)
        ablation.parameters()[i].value_mut() =
            model.find_parameter(ablation.parameter_names()[i])->value();
    for (std::size_t i = 0; i < ablation.bn_states().size(); ++i)
        ablation.bn_states()[i] = model.bn_states()[i];
    SeizurePredictor::ForwardOptions pin;
    pin.pin_attention_ones = true;
    const Var p_pin = model.forward(constant(batch), pin);
    const Var p_ab = ablation.forward(constant(batch));
    c.expect(p_pin.value().vec() == p_ab.value().vec(),
             "pinned s=1 logits equal the no-attention ablation bit for bit");
    return c.failures == 0;
}

// ---------------------------------------------------------------------------
// criterion 5: training sanity

bool criterion_training() {
    Check c;
    const FeatureDataset data = testfix::gaussian_features(2, 16, 555, 1.5);  // 32+32 segments
    ModelConfig arch;
    arch.dropout_p = 0.0;
    SeizurePredictor model = SeizurePredictor::init(arch, 10);
    Adam opt(model.parameters(), {1e-3, 0.9, 0.999, 1e-8, 0.0});
    Rng shuffle_rng(3), dropout_rng(4);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    int reached_at = -1;
    for (int epoch = 0; epoch < 200 && reached_at < 0; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t i = 0; i < order.size(); i += 32) {
            std::vector<std::size_t> idx(order.begin() + i,
                                         order.begin() + std::min(order.size(), i + 32));
            SeizurePredictor::ForwardOptions fo;
            fo.mode = Mode::train;
            fo.rng = &dropout_rng;
            const Var p = model.forward(constant(stack_batch(data, idx)), fo);
            const Var loss = weighted_bce(p, label_tensor(data, idx), 0.5);
            opt.zero_grad();
            backward(loss);
            opt.step();
        }
        if (evaluate(model, data).accuracy == 1.0) reached_at = epoch + 1;
    }
    c.expect(reached_at > 0, "64-segment balanced set reaches 100% train accuracy within 200 "
                             "epochs");
    if (reached_at > 0)
        std::cout << "    (100% train accuracy after " << reached_at << " epochs)\n";

    PlateauScheduler sched({25, 0.98, 1e-7, 1e-8}, 4e-4);
    sched.step(1.0);
    for (int i = 0; i < 25; ++i) sched.step(1.0);
    const bool no_cut_at_25 = sched.reductions() == 0;
    sched.step(1.0);
    c.expect(no_cut_at_25 && sched.reductions() == 1 &&
                 sched.lr() == 4e-4 * 0.98,
             "lr cut by 0.98 after exactly 26 flat epochs (patience 25)");
    PlateauScheduler floor_sched({0, 0.5, 1e-7, 1e-8}, 1e-3);
    floor_sched.step(1.0);
    for (int i = 0; i < 80; ++i) floor_sched.step(1.0);
    c.expect(floor_sched.lr() == 1e-7, "repeated reductions floor at 1e-7");
    return c.failures == 0;
}

// ---------------------------------------------------------------------------
// criterion 6: protocol integrity

bool criterion_protocols() {
    Check c;
    // stratified folds partition with class balance within one segment
    Rng rng(66);
    std::vector<int> labels;
    for (int i = 0; i < 517; ++i) labels.push_back(i % 5 < 2 ? 1 : 0);
    const FoldAssignment fa = stratified_folds(labels, 10, rng);
    std::set<std::size_t> seen;
    std::size_t mn = labels.size(), mx = 0;
    long mn_pos = 1 << 30, mx_pos = -1;
    for (const auto& fold : fa.folds) {
        mn = std::min(mn, fold.size());
        mx = std::max(mx, fold.size());
        long pos = 0;
        for (std::size_t i : fold) {
            seen.insert(i);
            pos += labels[i];
        }
        mn_pos = std::min(mn_pos, pos);
        mx_pos = std::max(mx_pos, pos);
    }
    c.expect(seen.size() == labels.size() && fa.folds.size() == 10,
             "folds partition the dataset");
    c.expect(mx - mn <= 1, "fold sizes within +-1");
    c.expect(fa.stratified && mx_pos - mn_pos <= 1, "class stratification within +-1 segment");

    // LOPO: train/test subject sets disjoint in every round
    const FeatureDataset lopo_data = testfix::gaussian_features(4, 4, 8, 2.0, 4);
    ModelConfig small;
    small.in_channels = 4;
    small.conv_channels = {4, 8, 16};
    small.se_reduction = 4;
    small.dense_units = 8;
    small.dropout_p = 0.0;
    TrainConfig quick;
    quick.lr = 1e-3;
    quick.batch_size = 8;
    quick.max_epochs = 2;
    quick.early_stop_patience = 2;
    quick.val_fraction = 0.0;
    quick.w_pos = 0.5;
    quick.weight_decay = 0.0;
    const auto rounds = lopo(lopo_data, quick, small);
    bool disjoint = rounds.size() == 4;
    for (const auto& r : rounds) {
        disjoint = disjoint && r.train_subjects.size() == 3;
        for (const auto& s : r.train_subjects) disjoint = disjoint && s != r.subject;
    }
    c.expect(disjoint, "every LOPO round excludes the held-out subject from training");

    // fine-tuning sets: exactly N=24 and N=120, disjoint from evaluation
    const FeatureDataset subj = testfix::gaussian_features(1, 70, 9, 2.0, 4);
    for (int n : {12, 60}) {
        const FinetuneSplit split = build_finetune_split(subj, n, 5);
        std::set<std::size_t> tune(split.tune_idx.begin(), split.tune_idx.end());
        bool ok = split.tune_idx.size() == static_cast<std::size_t>(2 * n);
        for (std::size_t e : split.eval_idx) ok = ok && tune.count(e) == 0;
        ok = ok && split.tune_idx.size() + split.eval_idx.size() == subj.size();
        c.expect(ok, "fine-tuning set N=" + std::to_string(2 * n) +
                         " with tune/eval disjointness");
    }
    return c.failures == 0;
}

// ---------------------------------------------------------------------------
// criterion 7: Shapley correctness

bool criterion_shapley() {
    Check c;
    Rng rng(77);
    std::vector<double> g(10);
    for (double& v : g) v = rng.uniform(0.5, 2.0);
    CoalitionFn additive = [&g](const std::vector<std::vector<char>>& coalitions) {
        std::vector<double> out;
        for (const auto& mask : coalitions) {
            double acc = 0.0;
            for (std::size_t i = 0; i < mask.size(); ++i)
                if (mask[i]) acc += g[i];
            out.push_back(acc);
        }
        return out;
    };
    const std::vector<double> exact = exact_shapley(10, additive);
    const ShapleyEstimate est = sample_shapley(10, additive, 2000, 3);
    double worst = 0.0;
    for (int i = 0; i < 10; ++i)
        worst = std::max(worst, std::fabs(est.values[i] - exact[i]) / std::fabs(exact[i]));
    c.expect(worst <= 0.02, "sampled vs exhaustive Shapley on 10-player additive surrogate "
                            "within 2%, got " + std::to_string(worst));

    // efficiency on the real model
    ModelConfig cfg;
    SeizurePredictor model = SeizurePredictor::init(cfg, 2025);
    FeatureDataset one = testfix::gaussian_features(1, 1, 99, 2.0);
    const MfccTensor& x = one[0];
    const AttributionTensor att = shapley_attribution(model, x, zeros_like(x), 20, 11);
    // the permutation marginals telescope, so sigma of the total is ~0
    const double err = std::fabs(att.total() - (att.f_input - att.f_baseline));
    c.expect(err <= 1e-9, "efficiency |sum(attr) - (f(x) - f(baseline))| within tolerance, got " +
                              std::to_string(err));
    return c.failures == 0;
}

// ---------------------------------------------------------------------------
// criterion 8: channel-importance pipeline

bool criterion_importance() {
    Check c;
    // hand-computed fixture: raw [3,-1,1,0...,ECG] -> processed [1,0,1/3,0...]
    std::vector<double> raw{3.0, -1.0, 1.0};
    raw.resize(18, 0.0);
    raw.push_back(7.0);  // ECG
    const std::vector<double> p = postprocess_importance(raw);
    c.expect(p.size() == 18 && p[0] == 1.0 && p[1] == 0.0 &&
                 std::fabs(p[2] - 1.0 / 3.0) < 1e-15,
             "clip -> drop ECG -> min-max reproduces the hand-computed fixture");

    // Eq-style arithmetic: alternating 0.1/0.3 slice has mean/std = 2
    AttributionTensor a;
    a.n_channels = 2;
    a.n_coeffs = 4;
    a.n_frames = 4;
    a.values.assign(32, 0.0);
    for (std::size_t i = 0; i < 16; ++i) a.values[i] = (i % 2 == 0) ? 0.1 : 0.3;
    for (std::size_t i = 16; i < 32; ++i) a.values[i] = 0.42;  // constant: sigma = 0
    const ChannelImportance imp = channel_importance({a, a, a});
    c.expect(std::fabs(imp.raw[0] - 2.0) <= 1e-12, "I_c = mean/std computed exactly");
    c.expect(imp.raw[1] == 0.0, "sigma = 0 guard maps the channel to 0");
    return c.failures == 0;
}

// ---------------------------------------------------------------------------
// criterion 9: desk-scale end-to-end benchmark

std::vector<std::string> synth_overrides(const fs::path& root) {
    return {
        "paths.raw_dir=" + (root / "raw").string(),
        "paths.cache_dir=" + (root / "cache").string(),
        "paths.runs_dir=" + (root / "runs").string(),
        "timing.preictal_s=100",
        "timing.interictal_gap_s=200",
        "timing.postictal_s=30",
        "synth.duration_s=400",
        "synth.seizure_onset_s=300",
        "synth.seizure_duration_s=40",
    };
}

bool criterion_end_to_end(int& failures_out) {
    Check c;
    const fs::path root =
        fs::temp_directory_path() / ("preictal_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    const auto overrides = synth_overrides(root);

    auto run = [&](const std::string& command, const std::string& out = "") {
        RunOptions opt;
        opt.command = command;
        opt.set_overrides = overrides;
        opt.out_dir = out;
        opt.seed = 20260811;
        return run_command(opt);
    };

    c.expect(run("synth") == 0, "synth completes");
    c.expect(run("ingest") == 0, "ingest completes");
    c.expect(run("featurize") == 0, "featurize completes");
    const std::string cv_dir = (root / "cv").string();
    c.expect(run("train-cv", cv_dir) == 0, "train-cv completes");

    double mean_f1 = 0.0;
    if (fs::exists(fs::path(cv_dir) / "summary.json")) {
        std::ifstream f(fs::path(cv_dir) / "summary.json");
        const nlohmann::json s = nlohmann::json::parse(f);
        mean_f1 = s.at("f1").at("mean").get<double>();
    }
    c.expect(mean_f1 >= 0.95, "synthetic 9-subject 10-fold mean F1 >= 0.95, got " +
                                  std::to_string(mean_f1));
    std::cout << "    (synthetic 10-fold mean F1 = " << mean_f1 << ")\n";

    // distribution-shifted fixture: fine-tuned LOPO must beat raw LOPO
    const FeatureDataset shifted = testfix::shifted_features(9, 20, 314159);
    ModelConfig arch;
    arch.dropout_p = 0.1;
    TrainConfig cfg;
    cfg.lr = 1e-3;
    cfg.batch_size = 64;
    cfg.weight_decay = 1e-4;
    cfg.w_pos = 0.5;
    cfg.max_epochs = 25;
    cfg.early_stop_patience = 8;
    cfg.val_fraction = 0.1;
    cfg.seed = 4711;
    const auto rounds = lopo(shifted, cfg, arch);

    TrainConfig ft = cfg;
    ft.max_epochs = 40;
    ft.early_stop_patience = 40;
    ft.val_fraction = 0.0;
    ft.batch_size = 24;
    const auto by_subject = indices_by_subject(shifted);
    double raw_mean = 0.0, ft_mean = 0.0;
    for (const auto& round : rounds) {
        const FinetuneResult r =
            finetune(round.model, subset(shifted, by_subject.at(round.subject)), 12, ft);
        raw_mean += r.before.f1 / static_cast<double>(rounds.size());
        ft_mean += r.after.f1 / static_cast<double>(rounds.size());
    }
    std::cout << "    (distribution-shifted fixture: raw LOPO F1 = " << raw_mean
              << ", fine-tuned F1 = " << ft_mean << ")\n";
    c.expect(ft_mean > raw_mean,
             "fine-tuned LOPO strictly exceeds raw LOPO on the shifted fixture");

    fs::remove_all(root);
    failures_out = c.failures;
    return c.failures == 0;
}

// optional, never gated: real-data comparison against the reference numbers
void extended_helsinki(const std::string& data_dir) {
    std::cout << "\n[extended] Helsinki mode on " << data_dir << "\n";
    const fs::path root = fs::temp_directory_path() / "preictal_helsinki_run";
    fs::create_directories(root);
    const std::vector<std::string> overrides = {
        "profile=helsinki",
        "paths.raw_dir=" + data_dir,
        "paths.cache_dir=" + (root / "cache").string(),
        "paths.runs_dir=" + (root / "runs").string(),
    };
    auto run = [&](const std::string& command, const std::string& out = "") {
        RunOptions opt;
        opt.command = command;
        opt.set_overrides = overrides;
        opt.out_dir = out;
        return run_command(opt);
    };
    if (run("ingest") != 0 || run("featurize") != 0) {
        std::cout << "[extended] ingest/featurize failed; see messages above\n";
        return;
    }
    const std::string cv_dir = (root / "cv").string();
    if (run("train-cv", cv_dir) != 0) {
        std::cout << "[extended] train-cv failed\n";
        return;
    }
    std::ifstream f(fs::path(cv_dir) / "summary.json");
    const nlohmann::json s = nlohmann::json::parse(f);
    const double f1 = s.at("f1").at("mean").get<double>() * 100.0;
    std::cout << "[extended] 10-fold F1 = " << f1 << "% (reference 97.95%; +-5 point band: "
              << (std::fabs(f1 - 97.95) <= 5.0 ? "inside" : "outside")
              << "; informational only, not a gate)\n";
}

}  // namespace

int main(int argc, char** argv) {
    std::string helsinki_dir;
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--helsinki") == 0 && i + 1 < argc) helsinki_dir = argv[++i];
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
    }

    struct Criterion {
        int number;
        const char* name;
        std::function<bool()> fn;
    };
    int c9_failures = 0;
    const std::vector<Criterion> criteria = {
        {1, "filter fidelity", criterion_filters},
        {2, "MFCC contract", criterion_mfcc},
        {3, "autodiff soundness", criterion_autodiff},
        {4, "architecture conformance", criterion_architecture},
        {5, "training sanity", criterion_training},
        {6, "protocol integrity", criterion_protocols},
        {7, "Shapley correctness", criterion_shapley},
        {8, "channel-importance pipeline", criterion_importance},
        {9, "end-to-end synthetic benchmark",
         [&c9_failures] { return criterion_end_to_end(c9_failures); }},
    };

    int failures = 0;
    for (const auto& crit : criteria) {
        if (only != 0 && crit.number != only) continue;
        const auto t0 = std::chrono::steady_clock::now();
        bool ok = false;
        try {
            ok = crit.fn();
        } catch (const std::exception& e) {
            std::cout << "    EXCEPTION: " << e.what() << "\n";
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << crit.number << ": "
                  << crit.name << " (" << secs << " s)\n";
        if (!ok) ++failures;
    }

    if (!helsinki_dir.empty()) extended_helsinki(helsinki_dir);

    if (failures == 0)
        std::cout << "acceptance: all criteria passed\n";
    else
        std::cout << "acceptance: " << failures << " criteria failed\n";
    return failures;
}
