#pragma once

#include <string>
#include <vector>

#include "preictal/segmentation.hpp"

namespace preictal {

struct MfccConfig {
    int frame_len = 256;   // samples; also the FFT size
    int hop = 128;
    int n_mels = 20;
    double fmin = 0.5;     // Hz
    double fmax = 100.0;   // Hz
    int n_mfcc = 20;
    double log_floor = 1e-10;

    void validate(int fs) const;
};

struct MelFilterbank {
    std::vector<std::vector<double>> weights;  // [n_mels][frame_len/2 + 1]
    std::vector<double> center_freqs;          // Hz, strictly increasing
};

// one segment's feature tensor, shape [n_channels][n_mfcc][n_frames]
struct MfccTensor {
    std::string subject_id;
    int label = 0;
    double t_start = 0.0;
    std::size_t n_channels = 0, n_coeffs = 0, n_frames = 0;
    std::vector<double> values;  // channel-major, then coefficient, then frame

    double& at(std::size_t c, std::size_t m, std::size_t t) {
        return values[(c * n_coeffs + m) * n_frames + t];
    }
    double at(std::size_t c, std::size_t m, std::size_t t) const {
        return values[(c * n_coeffs + m) * n_frames + t];
    }
};

double hz_to_mel(double hz);   // HTK variant, 2595 log10(1 + f/700)
double mel_to_hz(double mel);

// centered framing with frame_len/2 reflect padding, Hamming window applied
std::vector<std::vector<double>> frame_signal(const std::vector<double>& x, const MfccConfig& cfg);

MelFilterbank build_mel_filterbank(const MfccConfig& cfg, int fs);

// windowed FFT magnitude -> triangle energies -> ln(max(e, floor)) ->
// orthonormal DCT-II; returns [n_mfcc][n_frames]
std::vector<std::vector<double>> mfcc_channel(const std::vector<double>& x, const MfccConfig& cfg,
                                              const MelFilterbank& fb);

MfccTensor featurize_segment(const LabeledSegment& s, const MfccConfig& cfg, int fs,
                             const MelFilterbank& fb);

// orthonormal DCT-II of a vector (exposed for tests)
std::vector<double> dct2_orthonormal(const std::vector<double>& x);

// ---- feature cache ----------------------------------------------------------
// Same envelope as the segment cache. Layout:
//   magic "PIFEA001", u32 version (1), u32 subject id length + bytes,
//   u32 C, u32 M, u32 T (tensor shape), u64 tensor count S,
//   per tensor: u8 label, f64 t_start,
//   then S*C*M*T f32 values, channel-major, little-endian.
void write_feature_cache(const std::vector<MfccTensor>& tensors, const std::string& subject_id,
                         const std::string& path);

struct FeatureCache {
    std::string subject_id;
    std::vector<MfccTensor> tensors;
};

FeatureCache read_feature_cache(const std::string& path);

}  // namespace preictal
