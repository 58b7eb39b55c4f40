#pragma once

#include <string>
#include <vector>

#include "preictal/segmentation.hpp"

namespace preictal {

// Per-subject segment cache. Byte layout (all integers little-endian):
//
//   offset  size  field
//   0       8     magic "PISEG001"
//   8       4     u32 format version (1)
//   12      4     u32 subject id length L
//   16      L     subject id bytes (UTF-8)
//   ..      4     u32 fs (Hz)
//   ..      8     f64 window_s
//   ..      4     u32 channel count C
//   ..      8     u64 segment count S
//   ..      S*9   per segment: u8 label, f64 t_start
//   ..      S*C*round(window_s*fs)*4   f32 samples, segment-major, row-major
//
// Floats are IEEE-754 little-endian. Samples are stored as f32; training
// promotes them back to f64.
void write_segment_cache(const std::vector<LabeledSegment>& segments,
                         const std::string& subject_id, int fs, double window_s,
                         const std::string& path);

struct SegmentCache {
    std::string subject_id;
    int fs = 0;
    double window_s = 0.0;
    std::vector<LabeledSegment> segments;
};

SegmentCache read_segment_cache(const std::string& path);

}  // namespace preictal
