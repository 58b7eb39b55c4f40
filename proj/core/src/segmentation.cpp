#include "preictal/segmentation.hpp"

#include <algorithm>
#include <cmath>

namespace preictal {

void TimingPolicy::validate() const {
    if (preictal_s <= 0 || interictal_gap_s <= 0 || postictal_s <= 0 || window_s <= 0)
        throw ConfigError("timing policy: all durations must be positive");
}

namespace {

LabeledSegment cut(const std::vector<std::vector<double>>& channels, int fs,
                   const std::string& subject, int label, double t, double window_s) {
    LabeledSegment seg;
    seg.subject_id = subject;
    seg.label = label;
    seg.t_start = t;
    const std::size_t i0 = static_cast<std::size_t>(std::llround(t * fs));
    const std::size_t len = static_cast<std::size_t>(std::llround(window_s * fs));
    seg.data.reserve(channels.size());
    for (const auto& ch : channels)
        seg.data.emplace_back(ch.begin() + static_cast<std::ptrdiff_t>(i0),
                              ch.begin() + static_cast<std::ptrdiff_t>(i0 + len));
    return seg;
}

}  // namespace

std::vector<LabeledSegment> label_windows(const std::vector<std::vector<double>>& channels,
                                          int fs,
                                          const std::string& subject_id,
                                          const std::vector<SeizureInterval>& seizures,
                                          const TimingPolicy& policy) {
    policy.validate();
    if (fs <= 0) throw ConfigError("label_windows: fs must be positive");
    if (channels.empty()) throw ConfigError("label_windows: no channels");
    for (std::size_t i = 1; i < seizures.size(); ++i)
        if (seizures[i].onset_s < seizures[i - 1].offset_s)
            throw ConfigError("label_windows: seizures must be sorted and non-overlapping");

    const double duration = static_cast<double>(channels[0].size()) / fs;
    const double w = policy.window_s;
    std::vector<LabeledSegment> out;

    auto emit = [&](int label, double t) {
        if (t < 0.0) return;  // window would cross the recording start
        const std::size_t i0 = static_cast<std::size_t>(std::llround(t * fs));
        const std::size_t len = static_cast<std::size_t>(std::llround(w * fs));
        if (i0 + len > channels[0].size()) return;  // crosses the recording end
        out.push_back(cut(channels, fs, subject_id, label, t, w));
    };

    // preictal: anchored at the (possibly truncated) region start
    for (std::size_t i = 0; i < seizures.size(); ++i) {
        double anchor = seizures[i].onset_s - policy.preictal_s;
        if (i > 0) {
            const double prev_end = seizures[i - 1].offset_s + policy.postictal_s;
            if (prev_end > anchor) anchor = prev_end;
        }
        for (double t = anchor; t + w <= seizures[i].onset_s + 1e-9; t += w) emit(1, t);
    }

    // interictal: spans ending >= gap before every onset, outside all exclusion zones
    double cap = duration;
    for (const auto& s : seizures) cap = std::min(cap, s.onset_s - policy.interictal_gap_s);

    std::vector<std::pair<double, double>> regions;
    double start = 0.0;
    for (const auto& s : seizures) {
        const double zs = s.onset_s - policy.preictal_s;
        const double ze = s.offset_s + policy.postictal_s;
        if (zs > start) regions.emplace_back(start, zs);
        start = std::max(start, ze);
    }
    if (start < duration) regions.emplace_back(start, duration);

    for (const auto& [ra, rb] : regions) {
        const double end = std::min(rb, cap);
        for (double t = ra; t + w <= end + 1e-9; t += w) emit(0, t);
    }
    return out;
}

std::vector<std::string> select_subjects(
    const std::map<std::string, std::vector<LabeledSegment>>& per_subject) {
    std::vector<std::string> keep;
    for (const auto& [subject, segs] : per_subject) {
        bool has_pre = false, has_inter = false;
        for (const auto& s : segs) {
            if (s.label == 1) has_pre = true;
            else has_inter = true;
            if (has_pre && has_inter) break;
        }
        if (has_pre && has_inter) keep.push_back(subject);
    }
    return keep;
}

}  // namespace preictal
