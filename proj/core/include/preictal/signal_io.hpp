#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "preictal/errors.hpp"

namespace preictal {

// Multichannel raw recording in physical units (microvolts), one row per
// electrode, referenced as acquired (Helsinki: Cz reference).
struct Recording {
    std::string subject_id;
    int fs = 0;                              // Hz, positive integer
    std::vector<std::string> electrodes;     // unique labels, row order
    std::vector<std::vector<double>> data;   // [n_electrodes][n_samples]
    double start_time = 0.0;                 // seconds offset

    std::size_t n_channels() const { return data.size(); }
    std::size_t n_samples() const { return data.empty() ? 0 : data[0].size(); }
    double duration_s() const { return fs > 0 ? static_cast<double>(n_samples()) / fs : 0.0; }
    int channel_index(const std::string& label) const;  // -1 if absent

    // throws on violated invariants (ragged rows, non-finite samples, ...)
    void validate() const;
};

struct SeizureInterval {
    double onset_s = 0.0;
    double offset_s = 0.0;
    double duration() const { return offset_s - onset_s; }
};

// Per-expert seizure annotations; the Helsinki profile expects exactly 3 experts.
struct AnnotationSet {
    std::vector<std::string> expert_ids;
    std::vector<std::vector<SeizureInterval>> intervals;  // sorted, non-overlapping per expert

    std::size_t n_experts() const { return intervals.size(); }
};

// ---- EDF ------------------------------------------------------------------
//
// Plain EDF (1992 layout): 256-byte fixed header, 256 bytes of per-signal
// header fields stored field-major, then data records of 16-bit little-endian
// samples. The EDF+ annotations channel is not parsed; annotations live in
// the CSV sidecar.

struct ParseReport {
    std::vector<std::string> warnings;
};

Recording parse_edf(const std::vector<std::uint8_t>& bytes,
                    const std::string& subject_id = "",
                    ParseReport* report = nullptr);
Recording parse_edf_file(const std::string& path,
                         const std::string& subject_id = "",
                         ParseReport* report = nullptr);

// Quantizes each channel into the full int16 range over its own min/max.
std::vector<std::uint8_t> write_edf(const Recording& r);
void write_edf_file(const Recording& r, const std::string& path);

// Worst-case physical error of one digital step when `r` is written by write_edf.
double edf_quantization_step(const Recording& r);

// ---- annotation CSV sidecar ------------------------------------------------
// Header row `expert,onset_s,offset_s`, UTF-8, LF line endings.

AnnotationSet parse_annotations_csv(const std::string& text);
AnnotationSet read_annotations_file(const std::string& path);
std::string format_annotations_csv(const AnnotationSet& ann);
void write_annotations_file(const AnnotationSet& ann, const std::string& path);

// ---- consensus --------------------------------------------------------------
//
// Maximal intervals contained in every expert's union of intervals, keeping
// intersections of duration >= min_overlap_s. Empty expert list => empty result.
std::vector<SeizureInterval> consensus_intervals(const AnnotationSet& ann,
                                                 double min_overlap_s = 10.0);

// ---- synthetic recordings ----------------------------------------------------

struct SynthConfig {
    int fs = 256;
    double duration_s = 600.0;
    std::vector<std::string> electrodes;   // empty => 9 scalp electrodes + ECG
    std::vector<SeizureInterval> seizure_intervals;
    std::uint64_t seed = 0;
    double background_scale = 10.0;        // microvolts, 1/f-ish background sigma
    double burst_gain = 5.0;               // seizure sinusoid amplitude, x background
    double annotation_jitter_s = 1.0;      // experts shrink true intervals by U(0, jitter)
    double preictal_lead_s = 0.0;          // burst starts this long before the annotated onset
};

// Deterministic fixture: 1/f-like background everywhere plus a 2-4 Hz sinusoidal
// burst inside seizure intervals. Three synthetic experts annotate the true
// intervals with inward jitter so their consensus recovers them. A nonzero
// preictal_lead_s extends each burst backwards past the annotated onset,
// giving preictal windows a signature the classifier can learn.
std::pair<Recording, AnnotationSet> synth_record(const SynthConfig& cfg,
                                                 const std::string& subject_id = "synth");

}  // namespace preictal
