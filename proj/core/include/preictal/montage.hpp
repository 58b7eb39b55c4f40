#pragma once

#include <string>
#include <utility>
#include <vector>

#include "preictal/signal_io.hpp"

namespace preictal {

// 18 bipolar EEG derivations from 9 scalp electrodes, plus the ECG channel
// stacked as row 19.
struct MontageConfig {
    std::vector<std::pair<std::string, std::string>> eeg_pairs;  // (anode, cathode)
    std::string ecg_label = "ECG";

    std::size_t n_channels() const { return eeg_pairs.size() + 1; }
    std::vector<std::string> channel_names() const;  // "Fp1-T3", ..., ecg label
};

MontageConfig default_montage();

// row k (k < 18): anode_k - cathode_k; row 19: ECG verbatim
std::vector<std::vector<double>> build_montage(const Recording& r, const MontageConfig& m);

}  // namespace preictal
