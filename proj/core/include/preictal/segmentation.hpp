#pragma once

#include <map>
#include <string>
#include <vector>

#include "preictal/signal_io.hpp"

namespace preictal {

// Window timing rules (Fig. 1 style timeline). Defaults are the Helsinki
// profile: 30 min preictal, interictal at least 1 h before onset, 30 min
// postictal exclusion, 5 s windows.
struct TimingPolicy {
    double preictal_s = 1800.0;
    double interictal_gap_s = 3600.0;
    double postictal_s = 1800.0;
    double window_s = 5.0;

    void validate() const;
};

// One 5 s, 19-row window. Rows 1-18: bipolar EEG in montage order; row 19: ECG.
struct LabeledSegment {
    std::string subject_id;
    int label = 0;          // 0 interictal, 1 preictal
    double t_start = 0.0;   // seconds from recording start
    std::vector<std::vector<double>> data;  // [n_channels][window_s * fs]
};

// Cut non-overlapping windows from filtered montage channels.
//
// Preictal: [onset - preictal_s, onset), anchored at the region start; the
// region is truncated at the previous seizure's offset + postictal_s when they
// collide. Interictal: maximal spans that end at least interictal_gap_s before
// every onset and avoid [onset - preictal_s, offset + postictal_s] of every
// seizure, each cut from its own start. Windows crossing recording boundaries
// are dropped; trailing partial windows are dropped.
std::vector<LabeledSegment> label_windows(const std::vector<std::vector<double>>& channels,
                                          int fs,
                                          const std::string& subject_id,
                                          const std::vector<SeizureInterval>& seizures,
                                          const TimingPolicy& policy);

// subjects with at least one segment of each class
std::vector<std::string> select_subjects(
    const std::map<std::string, std::vector<LabeledSegment>>& per_subject);

}  // namespace preictal
