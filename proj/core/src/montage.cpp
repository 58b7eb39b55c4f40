#include "preictal/montage.hpp"

namespace preictal {

std::vector<std::string> MontageConfig::channel_names() const {
    std::vector<std::string> names;
    names.reserve(n_channels());
    for (const auto& [a, c] : eeg_pairs) names.push_back(a + "-" + c);
    names.push_back(ecg_label);
    return names;
}

MontageConfig default_montage() {
    MontageConfig m;
    m.eeg_pairs = {
        {"Fp1", "T3"}, {"T3", "O1"}, {"Fp1", "C3"}, {"C3", "O1"},
        {"Fp2", "C4"}, {"C4", "O2"}, {"Fp2", "T4"}, {"T4", "O2"},
        {"T3", "C3"},  {"C3", "Cz"}, {"Cz", "C4"},  {"C4", "T4"},
        {"Fp1", "Cz"}, {"Cz", "O1"}, {"Fp2", "Cz"}, {"Cz", "O2"},
        {"Fp1", "O2"}, {"Fp2", "O1"},
    };
    m.ecg_label = "ECG";
    return m;
}

std::vector<std::vector<double>> build_montage(const Recording& r, const MontageConfig& m) {
    std::vector<std::string> missing;
    auto require = [&](const std::string& label) {
        int idx = r.channel_index(label);
        if (idx < 0) missing.push_back(label);
        return idx;
    };
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(m.eeg_pairs.size());
    for (const auto& [a, c] : m.eeg_pairs) pairs.emplace_back(require(a), require(c));
    const int ecg = require(m.ecg_label);
    if (!missing.empty()) {
        std::string msg = "montage: electrodes missing from recording:";
        for (const auto& s : missing) msg += " " + s;
        throw MontageError(msg);
    }

    const std::size_t n = r.n_samples();
    std::vector<std::vector<double>> out(m.n_channels(), std::vector<double>(n));
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const double* an = r.data[pairs[k].first].data();
        const double* ca = r.data[pairs[k].second].data();
        double* dst = out[k].data();
        for (std::size_t i = 0; i < n; ++i) dst[i] = an[i] - ca[i];
    }
    out.back() = r.data[ecg];
    return out;
}

}  // namespace preictal
