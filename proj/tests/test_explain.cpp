#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "fixtures.hpp"
#include "preictal/explain.hpp"
#include "preictal/scalp_svg.hpp"

using namespace preictal;

namespace {

AttributionTensor attribution_fixture(std::size_t channels, std::size_t coeffs,
                                      std::size_t frames) {
    AttributionTensor a;
    a.n_channels = channels;
    a.n_coeffs = coeffs;
    a.n_frames = frames;
    a.values.assign(channels * coeffs * frames, 0.0);
    return a;
}

void fill_channel(AttributionTensor& a, std::size_t c, double even, double odd) {
    for (std::size_t m = 0; m < a.n_coeffs; ++m)
        for (std::size_t t = 0; t < a.n_frames; ++t)
            a.values[(c * a.n_coeffs + m) * a.n_frames + t] =
                ((m * a.n_frames + t) % 2 == 0) ? even : odd;
}

}  // namespace

TEST_SUITE("explain") {

TEST_CASE("channel importance implements mean-over-std with the sigma guard") {
    // slice alternating 0.1/0.3 (even count): mu = 0.2, population sigma = 0.1
    auto a = attribution_fixture(3, 4, 5);
    fill_channel(a, 0, 0.1, 0.3);
    fill_channel(a, 1, 0.5, 0.5);    // constant slice: sigma = 0 -> guard
    fill_channel(a, 2, -0.2, -0.2);  // constant negative
    const std::vector<AttributionTensor> attrs{a, a, a};
    const ChannelImportance imp = channel_importance(attrs);
    REQUIRE(imp.raw.size() == 3);
    CHECK(imp.raw[0] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(imp.raw[1] == 0.0);
    CHECK(imp.raw[2] == 0.0);
    CHECK_THROWS_AS(channel_importance({a, a}), DataError);
}

TEST_CASE("importance averages the first three tensors only") {
    auto a = attribution_fixture(2, 4, 4);
    auto b = attribution_fixture(2, 4, 4);
    auto c = attribution_fixture(2, 4, 4);
    auto d = attribution_fixture(2, 4, 4);
    fill_channel(a, 0, 0.0, 0.6);
    fill_channel(b, 0, 0.3, 0.3);
    fill_channel(c, 0, 0.6, 0.0);
    fill_channel(d, 0, 100.0, 100.0);  // must not affect the result
    const ChannelImportance with_d = channel_importance({a, b, c, d});
    const ChannelImportance without_d = channel_importance({a, b, c});
    CHECK(with_d.raw == without_d.raw);
}

TEST_CASE("postprocessing clips, drops ECG and min-max normalizes") {
    std::vector<double> raw{3.0, -1.0, 1.0};
    raw.resize(18, 0.0);   // EEG rows
    raw.push_back(55.0);   // ECG row, must be excluded before normalization
    const std::vector<double> p = postprocess_importance(raw);
    REQUIRE(p.size() == 18);
    CHECK(p[0] == doctest::Approx(1.0));
    CHECK(p[1] == doctest::Approx(0.0));
    CHECK(p[2] == doctest::Approx(1.0 / 3.0));
    for (std::size_t i = 3; i < 18; ++i) CHECK(p[i] == doctest::Approx(0.0));
}

TEST_CASE("postprocessing properties on random inputs") {
    Rng rng(64);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<double> raw(19);
        for (double& v : raw) v = rng.normal();
        const std::vector<double> p = postprocess_importance(raw);
        REQUIRE(p.size() == 18);
        bool any_pos = false;
        for (std::size_t i = 0; i < 18; ++i) any_pos = any_pos || raw[i] > 0.0;
        double mx = 0.0;
        for (double v : p) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
            mx = std::max(mx, v);
        }
        if (any_pos) CHECK(mx == doctest::Approx(1.0));
    }
}

TEST_CASE("explain test set withholds 6+6 per subject, first preictal chronologically") {
    const FeatureDataset data = testfix::gaussian_features(4, 10, 77, 2.0, 4);
    const ExplainSplit split = build_explain_testset(data, 6, 0.7, 3);
    CHECK(split.skipped_subjects.empty());
    CHECK(split.test_idx.size() == 4 * 12);

    std::set<std::size_t> test(split.test_idx.begin(), split.test_idx.end());
    for (std::size_t i : split.retrain_train_idx) CHECK(test.count(i) == 0);
    for (std::size_t i : split.retrain_val_idx) CHECK(test.count(i) == 0);
    CHECK(split.test_idx.size() + split.retrain_train_idx.size() + split.retrain_val_idx.size() ==
          data.size());

    // withheld preictal segments are the chronologically first six per subject
    for (const auto& [subject, idx] : indices_by_subject(data)) {
        std::vector<double> pre_starts;
        for (std::size_t i : idx)
            if (data[i].label == 1) pre_starts.push_back(data[i].t_start);
        std::sort(pre_starts.begin(), pre_starts.end());
        std::vector<double> withheld;
        for (std::size_t i : split.test_idx)
            if (data[i].subject_id == subject && data[i].label == 1)
                withheld.push_back(data[i].t_start);
        std::sort(withheld.begin(), withheld.end());
        REQUIRE(withheld.size() == 6);
        for (int k = 0; k < 6; ++k) CHECK(withheld[k] == pre_starts[k]);
    }

    // roughly 70/30 split of the remainder
    const double frac = static_cast<double>(split.retrain_train_idx.size()) /
                        static_cast<double>(split.retrain_train_idx.size() +
                                            split.retrain_val_idx.size());
    CHECK(frac == doctest::Approx(0.7).epsilon(0.12));
}

TEST_CASE("subjects lacking six segments per class are skipped") {
    FeatureDataset data = testfix::gaussian_features(2, 10, 78, 2.0, 4);
    FeatureDataset trimmed;
    for (const auto& t : data)
        if (!(t.subject_id == "s02" && t.label == 1 && t.t_start > 1010.0))
            trimmed.push_back(t);  // s02 keeps only 3 preictal segments
    const ExplainSplit split = build_explain_testset(trimmed, 6, 0.7, 3);
    REQUIRE(split.skipped_subjects.size() == 1);
    CHECK(split.skipped_subjects[0] == "s02");
    CHECK(split.test_idx.size() == 12);
}

TEST_CASE("attribution file round trip") {
    auto a = attribution_fixture(3, 4, 5);
    fill_channel(a, 1, -0.25, 0.75);
    a.t_start = 15.0;
    a.f_input = 0.8;
    a.f_baseline = 0.5;
    a.n_permutations = 40;
    a.seed = 1234;
    const std::string path =
        (std::filesystem::temp_directory_path() / "preictal_test.att").string();
    write_attribution_file({a, a}, path);
    const auto back = read_attribution_file(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].values == a.values);
    CHECK(back[0].t_start == 15.0);
    CHECK(back[0].f_input == 0.8);
    CHECK(back[0].n_permutations == 40);
    CHECK(back[0].seed == 1234);
    std::filesystem::remove(path);
}

TEST_CASE("scalp svg maps importance to opacity deterministically") {
    const MontageConfig montage = default_montage();
    std::vector<double> zeros(18, 0.0);
    const std::string all_zero = render_scalp_svg(zeros, montage);
    // every edge at minimum opacity
    std::size_t pos = 0;
    int edges = 0;
    while ((pos = all_zero.find("stroke-opacity=\"", pos)) != std::string::npos) {
        pos += 16;
        CHECK(all_zero.substr(pos, 6) == "0.1000");
        ++edges;
    }
    CHECK(edges == 18);

    std::vector<double> one_hot(18, 0.0);
    one_hot[4] = 1.0;  // Fp2-C4
    const std::string svg = render_scalp_svg(one_hot, montage, "subject x");
    CHECK(svg.find("stroke-opacity=\"1.0000\" data-channel=\"Fp2-C4\"") != std::string::npos);
    CHECK(svg.find("<title>subject x</title>") != std::string::npos);

    // parse-back: data-importance attributes round trip at format precision
    Rng rng(9);
    std::vector<double> imp(18);
    for (double& v : imp) v = rng.uniform();
    const std::string rendered = render_scalp_svg(imp, montage);
    const std::vector<std::string> names = montage.channel_names();
    for (int k = 0; k < 18; ++k) {
        char want[128];
        std::snprintf(want, sizeof(want), "data-channel=\"%s\" data-importance=\"%.6f\"",
                      names[static_cast<std::size_t>(k)].c_str(), imp[static_cast<std::size_t>(k)]);
        CHECK(rendered.find(want) != std::string::npos);
    }
    CHECK(render_scalp_svg(imp, montage) == rendered);  // byte determinism

    // 9 labeled electrodes present
    for (const char* label : {"Fp1", "Fp2", "T3", "T4", "C3", "C4", "Cz", "O1", "O2"})
        CHECK(rendered.find(">" + std::string(label) + "</text>") != std::string::npos);

    CHECK_THROWS_AS(render_scalp_svg(std::vector<double>(17, 0.0), montage), ConfigError);
    std::vector<double> bad(18, 0.0);
    bad[0] = 1.5;
    CHECK_THROWS_AS(render_scalp_svg(bad, montage), ConfigError);
}

}  // TEST_SUITE
