#pragma once

#include <complex>
#include <vector>

#include "preictal/errors.hpp"

namespace preictal {

// One second-order section, a0 normalized to 1.
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;

    // poles strictly inside the unit circle
    bool stable() const { return std::abs(a2) < 1.0 && std::abs(a1) < 1.0 + a2; }
};

struct BiquadCascade {
    std::vector<Biquad> sections;
    int fs = 0;

    int order() const { return 2 * static_cast<int>(sections.size()); }
    // complex response at frequency f (Hz), single pass
    std::complex<double> response(double f_hz) const;
    double magnitude_db(double f_hz) const;
};

enum class BandKind { bandpass, bandstop };

// Butterworth prototype of the given order, prewarped, lowpass->band
// transformed, bilinear-mapped and factored into stable biquads.
// `order` is the prototype order; the digital filter has 2*order poles.
BiquadCascade design_butterworth(BandKind kind, double lo_hz, double hi_hz, int order, int fs);

// Forward-backward filtering (zero net phase). Symmetric-reflection padding of
// up to three seconds, never less than 3x the filter order; per-section
// initial state matched to the first padded sample to suppress start-up
// transients.
std::vector<double> apply_zero_phase(const BiquadCascade& c, const std::vector<double>& x);

// Single forward pass, optional initial state (2 doubles per section, DF2T).
std::vector<double> sosfilt(const BiquadCascade& c, const std::vector<double>& x,
                            std::vector<double>* state = nullptr);

// Step-response steady state per section, used to seed filtfilt edges.
std::vector<double> sos_step_state(const BiquadCascade& c);

// Keep every factor-th sample. Caller is responsible for prior anti-aliasing.
std::vector<double> downsample(const std::vector<double>& x, int factor);

}  // namespace preictal
