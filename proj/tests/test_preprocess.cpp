#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "preictal/montage.hpp"
#include "preictal/rng.hpp"
#include "preictal/segment_cache.hpp"
#include "preictal/segmentation.hpp"

using namespace preictal;

namespace {

Recording three_electrode_fixture() {
    Recording r;
    r.subject_id = "fix";
    r.fs = 4;
    r.electrodes = {"A", "B", "ECG"};
    r.data = {{1, 2, 3, 4}, {10, 10, 10, 10}, {7, 8, 9, 10}};
    return r;
}

// Independent per-second re-derivation of the window rules, built from a
// state mask rather than interval arithmetic.
std::vector<std::pair<double, int>> window_mask_oracle(int duration_s,
                                                       const std::vector<SeizureInterval>& seizures,
                                                       const TimingPolicy& p) {
    enum State { allowed = 0, preictal = 1, excluded = 2 };
    std::vector<int> state(duration_s, allowed);
    for (const auto& s : seizures) {
        for (int t = std::max(0, (int)(s.onset_s - p.preictal_s)); t < (int)s.onset_s; ++t)
            if (state[t] == allowed) state[t] = preictal;
        for (int t = (int)s.onset_s; t < std::min(duration_s, (int)(s.offset_s + p.postictal_s)); ++t)
            state[t] = excluded;
    }
    const int w = (int)p.window_s;
    std::vector<std::pair<double, int>> out;

    for (std::size_t i = 0; i < seizures.size(); ++i) {
        const int onset = (int)seizures[i].onset_s;
        int anchor;
        const int natural = onset - (int)p.preictal_s;
        if (i > 0 && (int)(seizures[i - 1].offset_s + p.postictal_s) > natural)
            anchor = (int)(seizures[i - 1].offset_s + p.postictal_s);
        else
            anchor = natural;  // may be negative: grid fixed, early windows dropped
        for (int t = anchor; t + w <= onset; t += w) {
            if (t < 0) continue;
            bool ok = true;
            for (int u = t; u < t + w; ++u) ok = ok && state[u] == preictal;
            if (ok) out.emplace_back((double)t, 1);
        }
    }

    int cap = duration_s;
    for (const auto& s : seizures) cap = std::min(cap, (int)(s.onset_s - p.interictal_gap_s));
    int t = 0;
    while (t < duration_s) {
        if (state[t] != allowed) {
            ++t;
            continue;
        }
        int e = t;
        while (e < duration_s && state[e] == allowed) ++e;
        for (int u = t; u + w <= std::min(e, cap); u += w) out.emplace_back((double)u, 0);
        t = e;
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::pair<double, int>> emitted(const std::vector<LabeledSegment>& segs) {
    std::vector<std::pair<double, int>> out;
    for (const auto& s : segs) out.emplace_back(s.t_start, s.label);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::vector<double>> ramp_channels(int n_channels, int duration_s, int fs) {
    std::vector<std::vector<double>> ch(n_channels,
                                        std::vector<double>((std::size_t)duration_s * fs));
    for (auto& c : ch)
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = static_cast<double>(i);
    return ch;
}

}  // namespace

TEST_SUITE("preprocess") {

TEST_CASE("default montage matches the 18-pair channel list") {
    const MontageConfig m = default_montage();
    REQUIRE(m.eeg_pairs.size() == 18);
    CHECK(m.eeg_pairs[0] == std::pair<std::string, std::string>{"Fp1", "T3"});
    CHECK(m.eeg_pairs[1] == std::pair<std::string, std::string>{"T3", "O1"});
    CHECK(m.eeg_pairs[17] == std::pair<std::string, std::string>{"Fp2", "O1"});
    CHECK(m.n_channels() == 19);
    CHECK(m.channel_names()[0] == "Fp1-T3");
    CHECK(m.channel_names()[18] == "ECG");
}

TEST_CASE("montage differencing on a hand-built fixture") {
    const Recording r = three_electrode_fixture();
    MontageConfig m;
    m.eeg_pairs = {{"A", "B"}, {"A", "A"}, {"B", "A"}};
    m.ecg_label = "ECG";
    const auto ch = build_montage(r, m);
    REQUIRE(ch.size() == 4);
    CHECK(ch[0] == std::vector<double>{-9, -8, -7, -6});
    CHECK(ch[1] == std::vector<double>{0, 0, 0, 0});  // anode == cathode
    CHECK(ch[2] == std::vector<double>{9, 8, 7, 6});
    CHECK(ch[3] == std::vector<double>{7, 8, 9, 10});  // ECG verbatim
}

TEST_CASE("montage lists every missing electrode") {
    const Recording r = three_electrode_fixture();
    MontageConfig m;
    m.eeg_pairs = {{"A", "Xq"}, {"Yq", "B"}};
    m.ecg_label = "ECG";
    try {
        build_montage(r, m);
        FAIL("expected MontageError");
    } catch (const MontageError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("Xq") != std::string::npos);
        CHECK(msg.find("Yq") != std::string::npos);
    }
}

TEST_CASE("helsinki-style timing: one seizure at the end of two hours") {
    TimingPolicy p;  // 1800/3600/1800/5 defaults
    const int fs = 4;
    const auto channels = ramp_channels(1, 7200, fs);
    // onset exactly at the recording end leaves no ictal samples inside
    const auto segs = label_windows(channels, fs, "x", {{7200.0, 7260.0}}, p);
    std::size_t n_pre = 0;
    double min_pre = 1e18, max_pre = -1e18, max_inter_end = -1e18;
    for (const auto& s : segs) {
        if (s.label == 1) {
            ++n_pre;
            min_pre = std::min(min_pre, s.t_start);
            max_pre = std::max(max_pre, s.t_start);
        } else {
            max_inter_end = std::max(max_inter_end, s.t_start + p.window_s);
        }
    }
    CHECK(n_pre == 360);
    CHECK(min_pre == doctest::Approx(5400.0));
    CHECK(max_pre == doctest::Approx(7195.0));
    CHECK(max_inter_end <= 3600.0);
}

TEST_CASE("early seizure leaves no interictal windows") {
    TimingPolicy p;
    const auto channels = ramp_channels(1, 3000, 4);
    const auto segs = label_windows(channels, 4, "x", {{1000.0, 1100.0}}, p);
    for (const auto& s : segs) CHECK(s.label == 1);
}

TEST_CASE("window content slices the right samples") {
    TimingPolicy p;
    p.preictal_s = 20;
    p.interictal_gap_s = 40;
    p.postictal_s = 10;
    p.window_s = 5;
    const int fs = 4;
    const auto channels = ramp_channels(2, 200, fs);
    const auto segs = label_windows(channels, fs, "x", {{100.0, 120.0}}, p);
    REQUIRE(!segs.empty());
    for (const auto& s : segs) {
        REQUIRE(s.data.size() == 2);
        REQUIRE(s.data[0].size() == 20);
        const double expect_first = s.t_start * fs;
        CHECK(s.data[0][0] == doctest::Approx(expect_first));
        CHECK(s.data[1][19] == doctest::Approx(expect_first + 19));
    }
}

TEST_CASE("windows match the per-second mask oracle on random layouts") {
    TimingPolicy p;
    p.preictal_s = 100;
    p.interictal_gap_s = 200;
    p.postictal_s = 50;
    p.window_s = 5;
    const int fs = 4;
    const int duration = 2000;
    Rng rng(1234);
    for (int layout = 0; layout < 20; ++layout) {
        std::vector<SeizureInterval> seizures;
        int t = 100 + (int)rng.uniform_int(400);
        const int n_seiz = 1 + (int)rng.uniform_int(3);
        for (int i = 0; i < n_seiz && t < duration - 100; ++i) {
            const int len = 10 + (int)rng.uniform_int(60);
            seizures.push_back({(double)t, (double)std::min(duration, t + len)});
            t += len + 60 + (int)rng.uniform_int(500);
        }
        const auto channels = ramp_channels(1, duration, fs);
        const auto got = emitted(label_windows(channels, fs, "x", seizures, p));
        const auto want = window_mask_oracle(duration, seizures, p);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].first == doctest::Approx(want[i].first));
            CHECK(got[i].second == want[i].second);
        }
        // disjointness within the emitted set
        for (std::size_t i = 1; i < got.size(); ++i)
            CHECK(got[i].first - got[i - 1].first >= p.window_s - 1e-9);
    }
}

TEST_CASE("multi-seizure collision truncates the later preictal span") {
    TimingPolicy p;
    p.preictal_s = 100;
    p.interictal_gap_s = 200;
    p.postictal_s = 50;
    p.window_s = 5;
    const auto channels = ramp_channels(1, 1000, 4);
    // second onset at 400: natural preictal start 300, but seizure 1 ends 320+50=370
    const auto segs = label_windows(channels, 4, "x", {{300.0, 320.0}, {400.0, 420.0}}, p);
    double earliest_pre2 = 1e18;
    for (const auto& s : segs)
        if (s.label == 1 && s.t_start >= 350.0) earliest_pre2 = std::min(earliest_pre2, s.t_start);
    CHECK(earliest_pre2 == doctest::Approx(370.0));
}

TEST_CASE("select_subjects keeps only both-class subjects") {
    std::map<std::string, std::vector<LabeledSegment>> per_subject;
    LabeledSegment pre, inter;
    pre.label = 1;
    inter.label = 0;
    per_subject["both"] = {pre, inter};
    per_subject["only_pre"] = {pre, pre};
    per_subject["only_inter"] = {inter};
    per_subject["empty"] = {};
    CHECK(select_subjects(per_subject) == std::vector<std::string>{"both"});

    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        std::map<std::string, std::vector<LabeledSegment>> random_subjects;
        std::vector<std::string> expected;
        for (int s = 0; s < 6; ++s) {
            const std::string id = "s" + std::to_string(s);
            bool has_pre = false, has_inter = false;
            const int n = (int)rng.uniform_int(5);
            for (int i = 0; i < n; ++i) {
                LabeledSegment seg;
                seg.label = (int)rng.uniform_int(2);
                (seg.label ? has_pre : has_inter) = true;
                random_subjects[id].push_back(seg);
            }
            random_subjects[id];
            if (has_pre && has_inter) expected.push_back(id);
        }
        CHECK(select_subjects(random_subjects) == expected);
    }
}

TEST_CASE("segment cache round trip") {
    TimingPolicy p;
    p.preictal_s = 20;
    p.interictal_gap_s = 40;
    p.postictal_s = 10;
    p.window_s = 5;
    const int fs = 4;
    auto channels = ramp_channels(3, 200, fs);
    for (auto& c : channels)
        for (auto& v : c) v = std::sin(v * 0.37) * 42.5;
    const auto segs = label_windows(channels, fs, "cache_subject", {{100.0, 120.0}}, p);
    REQUIRE(!segs.empty());

    const std::string path =
        (std::filesystem::temp_directory_path() / "preictal_test_cache.seg").string();
    write_segment_cache(segs, "cache_subject", fs, p.window_s, path);
    const SegmentCache back = read_segment_cache(path);
    CHECK(back.subject_id == "cache_subject");
    CHECK(back.fs == fs);
    CHECK(back.window_s == doctest::Approx(5.0));
    REQUIRE(back.segments.size() == segs.size());
    for (std::size_t i = 0; i < segs.size(); ++i) {
        CHECK(back.segments[i].label == segs[i].label);
        CHECK(back.segments[i].t_start == segs[i].t_start);
        for (std::size_t c = 0; c < segs[i].data.size(); ++c)
            for (std::size_t j = 0; j < segs[i].data[c].size(); ++j)
                CHECK(back.segments[i].data[c][j] ==
                      static_cast<double>(static_cast<float>(segs[i].data[c][j])));
    }
    std::filesystem::remove(path);

    // corrupting the magic must be detected
    std::ofstream f(path, std::ios::binary);
    f << "NOTMAGIC garbage";
    f.close();
    CHECK_THROWS_AS(read_segment_cache(path), FormatError);
    std::filesystem::remove(path);
}

}  // TEST_SUITE
