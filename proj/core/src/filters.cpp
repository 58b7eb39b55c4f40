#include "preictal/filters.hpp"

#include <algorithm>
#include <cmath>

namespace preictal {

namespace {

using cplx = std::complex<double>;
constexpr double kPi = 3.141592653589793238462643383279502884;

struct Zpk {
    std::vector<cplx> zeros;
    std::vector<cplx> poles;
    double gain = 1.0;
};

// analog Butterworth lowpass prototype, cutoff 1 rad/s
Zpk butterworth_prototype(int order) {
    Zpk zpk;
    zpk.poles.reserve(order);
    for (int k = 0; k < order; ++k) {
        const double theta = kPi * (2.0 * k + order + 1.0) / (2.0 * order);
        zpk.poles.emplace_back(std::cos(theta), std::sin(theta));
    }
    return zpk;
}

Zpk lp_to_bandpass(const Zpk& lp, double w0, double bw) {
    Zpk out;
    out.gain = lp.gain * std::pow(bw, static_cast<double>(lp.poles.size() - lp.zeros.size()));
    auto transform = [&](const cplx& s) -> std::pair<cplx, cplx> {
        const cplx half = s * (bw / 2.0);
        const cplx root = std::sqrt(half * half - w0 * w0);
        return {half + root, half - root};
    };
    for (const cplx& z : lp.zeros) {
        auto [z1, z2] = transform(z);
        out.zeros.push_back(z1);
        out.zeros.push_back(z2);
    }
    for (const cplx& p : lp.poles) {
        auto [p1, p2] = transform(p);
        out.poles.push_back(p1);
        out.poles.push_back(p2);
    }
    const std::size_t degree = lp.poles.size() - lp.zeros.size();
    for (std::size_t i = 0; i < degree; ++i) out.zeros.emplace_back(0.0, 0.0);
    return out;
}

Zpk lp_to_bandstop(const Zpk& lp, double w0, double bw) {
    Zpk out;
    cplx num(1.0, 0.0), den(1.0, 0.0);
    for (const cplx& z : lp.zeros) num *= -z;
    for (const cplx& p : lp.poles) den *= -p;
    out.gain = lp.gain * (num / den).real();

    auto transform = [&](const cplx& s) -> std::pair<cplx, cplx> {
        const cplx inv = (bw / 2.0) / s;
        const cplx root = std::sqrt(inv * inv - w0 * w0);
        return {inv + root, inv - root};
    };
    for (const cplx& z : lp.zeros) {
        auto [z1, z2] = transform(z);
        out.zeros.push_back(z1);
        out.zeros.push_back(z2);
    }
    for (const cplx& p : lp.poles) {
        auto [p1, p2] = transform(p);
        out.poles.push_back(p1);
        out.poles.push_back(p2);
    }
    const std::size_t degree = lp.poles.size() - lp.zeros.size();
    for (std::size_t i = 0; i < degree; ++i) {
        out.zeros.emplace_back(0.0, w0);
        out.zeros.emplace_back(0.0, -w0);
    }
    return out;
}

Zpk bilinear(const Zpk& analog, double fs) {
    const double fs2 = 2.0 * fs;
    Zpk out;
    cplx num(1.0, 0.0), den(1.0, 0.0);
    for (const cplx& z : analog.zeros) {
        out.zeros.push_back((fs2 + z) / (fs2 - z));
        num *= (fs2 - z);
    }
    for (const cplx& p : analog.poles) {
        out.poles.push_back((fs2 + p) / (fs2 - p));
        den *= (fs2 - p);
    }
    const std::size_t degree = analog.poles.size() - analog.zeros.size();
    for (std::size_t i = 0; i < degree; ++i) out.zeros.emplace_back(-1.0, 0.0);
    out.gain = analog.gain * (num / den).real();
    return out;
}

// Group roots into conjugate (or real) pairs. Roots of a real-coefficient
// polynomial always admit this grouping.
std::vector<std::pair<cplx, cplx>> conjugate_pairs(std::vector<cplx> roots) {
    constexpr double tol = 1e-9;
    std::vector<std::pair<cplx, cplx>> pairs;
    std::vector<cplx> reals;
    std::vector<bool> used(roots.size(), false);
    for (std::size_t i = 0; i < roots.size(); ++i) {
        if (used[i]) continue;
        if (std::fabs(roots[i].imag()) <= tol * (1.0 + std::abs(roots[i]))) {
            reals.push_back(roots[i]);
            used[i] = true;
            continue;
        }
        std::size_t best = roots.size();
        double best_d = 0.0;
        for (std::size_t j = i + 1; j < roots.size(); ++j) {
            if (used[j]) continue;
            const double d = std::abs(roots[j] - std::conj(roots[i]));
            if (best == roots.size() || d < best_d) {
                best = j;
                best_d = d;
            }
        }
        if (best == roots.size())
            throw DesignError("filter design: unpaired complex root");
        used[i] = used[best] = true;
        // snap to an exact conjugate pair so section coefficients are real
        const cplx mean(0.5 * (roots[i].real() + roots[best].real()),
                        0.5 * (std::fabs(roots[i].imag()) + std::fabs(roots[best].imag())));
        pairs.emplace_back(mean, std::conj(mean));
    }
    std::sort(reals.begin(), reals.end(),
              [](const cplx& a, const cplx& b) { return a.real() < b.real(); });
    for (std::size_t i = 0; i + 1 < reals.size(); i += 2)
        pairs.emplace_back(reals[i], reals[i + 1]);
    if (reals.size() % 2 != 0)
        throw DesignError("filter design: odd number of real roots cannot form biquads");
    return pairs;
}

BiquadCascade zpk_to_sos(const Zpk& zpk, int fs) {
    if (zpk.zeros.size() != zpk.poles.size())
        throw DesignError("filter design: zero/pole count mismatch");

    auto pole_pairs = conjugate_pairs(zpk.poles);
    auto zero_pairs = conjugate_pairs(zpk.zeros);
    if (pole_pairs.size() != zero_pairs.size())
        throw DesignError("filter design: pairing produced unequal section counts");

    // process pole pairs closest to the unit circle first, each taking its
    // nearest remaining zero pair; keeps near-cancelling roots in one section
    std::vector<std::size_t> order(pole_pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::fabs(1.0 - std::abs(pole_pairs[a].first)) <
               std::fabs(1.0 - std::abs(pole_pairs[b].first));
    });

    std::vector<bool> zero_used(zero_pairs.size(), false);
    BiquadCascade cascade;
    cascade.fs = fs;
    cascade.sections.resize(pole_pairs.size());
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const auto& pp = pole_pairs[order[rank]];
        std::size_t best = zero_pairs.size();
        double best_d = 0.0;
        for (std::size_t j = 0; j < zero_pairs.size(); ++j) {
            if (zero_used[j]) continue;
            const double d = std::min(std::abs(zero_pairs[j].first - pp.first),
                                      std::abs(zero_pairs[j].second - pp.first));
            if (best == zero_pairs.size() || d < best_d) {
                best = j;
                best_d = d;
            }
        }
        zero_used[best] = true;
        const auto& zp = zero_pairs[best];

        Biquad s;
        s.b0 = 1.0;
        s.b1 = -(zp.first + zp.second).real();
        s.b2 = (zp.first * zp.second).real();
        s.a1 = -(pp.first + pp.second).real();
        s.a2 = (pp.first * pp.second).real();
        cascade.sections[rank] = s;
    }
    cascade.sections[0].b0 *= zpk.gain;
    cascade.sections[0].b1 *= zpk.gain;
    cascade.sections[0].b2 *= zpk.gain;

    for (const Biquad& s : cascade.sections)
        if (!s.stable())
            throw DesignError("filter design: unstable second-order section (a1=" +
                              std::to_string(s.a1) + ", a2=" + std::to_string(s.a2) + ")");
    return cascade;
}

}  // namespace

std::complex<double> BiquadCascade::response(double f_hz) const {
    const double w = 2.0 * kPi * f_hz / fs;
    const cplx z1 = std::polar(1.0, -w);
    const cplx z2 = z1 * z1;
    cplx h(1.0, 0.0);
    for (const Biquad& s : sections)
        h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
    return h;
}

double BiquadCascade::magnitude_db(double f_hz) const {
    return 20.0 * std::log10(std::abs(response(f_hz)));
}

BiquadCascade design_butterworth(BandKind kind, double lo_hz, double hi_hz, int order, int fs) {
    if (fs <= 0) throw ConfigError("design_butterworth: fs must be positive");
    if (order < 1) throw ConfigError("design_butterworth: order must be >= 1");
    if (!(0.0 < lo_hz && lo_hz < hi_hz && hi_hz < fs / 2.0))
        throw ConfigError("design_butterworth: need 0 < lo < hi < fs/2 (got lo=" +
                          std::to_string(lo_hz) + ", hi=" + std::to_string(hi_hz) +
                          ", fs=" + std::to_string(fs) + ")");

    const double w_lo = 2.0 * fs * std::tan(kPi * lo_hz / fs);
    const double w_hi = 2.0 * fs * std::tan(kPi * hi_hz / fs);
    const double w0 = std::sqrt(w_lo * w_hi);
    const double bw = w_hi - w_lo;

    const Zpk lp = butterworth_prototype(order);
    const Zpk banded = (kind == BandKind::bandpass) ? lp_to_bandpass(lp, w0, bw)
                                                    : lp_to_bandstop(lp, w0, bw);
    return zpk_to_sos(bilinear(banded, static_cast<double>(fs)), fs);
}

std::vector<double> sosfilt(const BiquadCascade& c, const std::vector<double>& x,
                            std::vector<double>* state) {
    std::vector<double> st;
    if (state && !state->empty()) {
        if (state->size() != 2 * c.sections.size())
            throw ConfigError("sosfilt: state size must be 2 per section");
        st = *state;
    } else {
        st.assign(2 * c.sections.size(), 0.0);
    }
    std::vector<double> y = x;
    for (std::size_t s = 0; s < c.sections.size(); ++s) {
        const Biquad& q = c.sections[s];
        double s1 = st[2 * s], s2 = st[2 * s + 1];
        for (double& v : y) {
            const double in = v;
            const double out = q.b0 * in + s1;
            s1 = q.b1 * in - q.a1 * out + s2;
            s2 = q.b2 * in - q.a2 * out;
            v = out;
        }
        st[2 * s] = s1;
        st[2 * s + 1] = s2;
    }
    if (state) *state = st;
    return y;
}

std::vector<double> sos_step_state(const BiquadCascade& c) {
    std::vector<double> st(2 * c.sections.size());
    double level = 1.0;  // steady input level entering each section
    for (std::size_t s = 0; s < c.sections.size(); ++s) {
        const Biquad& q = c.sections[s];
        const double denom = 1.0 + q.a1 + q.a2;
        const double gain = (q.b0 + q.b1 + q.b2) / denom;
        const double y = level * gain;
        st[2 * s + 1] = q.b2 * level - q.a2 * y;
        st[2 * s] = y - q.b0 * level;
        level = y;
    }
    return st;
}

std::vector<double> apply_zero_phase(const BiquadCascade& c, const std::vector<double>& x) {
    const std::size_t n = x.size();
    const std::size_t min_margin = 3 * static_cast<std::size_t>(c.order());
    if (n <= min_margin)
        throw LengthError("apply_zero_phase: signal length " + std::to_string(n) +
                          " must exceed 3x filter order (" + std::to_string(min_margin) + ")");

    // up to three seconds of padding: the 49-51 Hz notch poles sit at radius
    // ~0.991 (~0.4 s ring-down) and 3x order alone cannot absorb that;
    // a finite tone still leaves O(1) edge wavelets (its spectral spread
    // outside the stopband), so stopband depth must be measured on long
    // signals
    const std::size_t padlen =
        std::min(n - 1, std::max(min_margin, static_cast<std::size_t>(3 * c.fs)));

    // classic odd (antisymmetric) reflection: value- and slope-continuous at
    // the junctions, which suits slowly drifting biosignals
    std::vector<double> padded;
    padded.reserve(n + 2 * padlen);
    for (std::size_t i = 0; i < padlen; ++i) padded.push_back(2.0 * x[0] - x[padlen - i]);
    padded.insert(padded.end(), x.begin(), x.end());
    for (std::size_t i = 0; i < padlen; ++i) padded.push_back(2.0 * x[n - 1] - x[n - 2 - i]);

    const std::vector<double> zi = sos_step_state(c);
    auto scaled = [&](double v) {
        std::vector<double> st(zi.size());
        for (std::size_t i = 0; i < zi.size(); ++i) st[i] = zi[i] * v;
        return st;
    };

    std::vector<double> st = scaled(padded.front());
    std::vector<double> y = sosfilt(c, padded, &st);
    std::reverse(y.begin(), y.end());
    st = scaled(y.front());
    y = sosfilt(c, y, &st);
    std::reverse(y.begin(), y.end());

    return std::vector<double>(y.begin() + static_cast<std::ptrdiff_t>(padlen),
                               y.begin() + static_cast<std::ptrdiff_t>(padlen + n));
}

std::vector<double> downsample(const std::vector<double>& x, int factor) {
    if (factor < 1) throw ConfigError("downsample: factor must be >= 1");
    if (factor == 1) return x;
    std::vector<double> y;
    y.reserve(x.size() / factor + 1);
    for (std::size_t i = 0; i < x.size(); i += factor) y.push_back(x[i]);
    return y;
}

}  // namespace preictal
