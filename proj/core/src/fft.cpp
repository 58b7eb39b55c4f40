#include "preictal/fft.hpp"

#include <cmath>

namespace preictal {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

bool power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }
}  // namespace

Fft::Fft(std::size_t n) : n_(n) {
    if (!power_of_two(n)) throw ConfigError("fft: size must be a power of two, got " + std::to_string(n));
    bitrev_.resize(n);
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < n) ++bits;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t r = 0;
        for (std::size_t b = 0; b < bits; ++b)
            if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
        bitrev_[i] = r;
    }
    twiddle_.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
        const double a = -kTwoPi * static_cast<double>(k) / static_cast<double>(n);
        twiddle_[k] = {std::cos(a), std::sin(a)};
    }
}

void Fft::forward(std::vector<std::complex<double>>& x) const {
    if (x.size() != n_) throw ConfigError("fft: input length != plan size");
    for (std::size_t i = 0; i < n_; ++i) {
        const std::size_t j = bitrev_[i];
        if (j > i) std::swap(x[i], x[j]);
    }
    for (std::size_t len = 2; len <= n_; len <<= 1) {
        const std::size_t half = len >> 1;
        const std::size_t stride = n_ / len;
        for (std::size_t base = 0; base < n_; base += len) {
            for (std::size_t k = 0; k < half; ++k) {
                const std::complex<double> w = twiddle_[k * stride];
                const std::complex<double> t = w * x[base + k + half];
                const std::complex<double> u = x[base + k];
                x[base + k] = u + t;
                x[base + k + half] = u - t;
            }
        }
    }
}

std::vector<double> Fft::magnitude(const std::vector<double>& frame) const {
    if (frame.size() != n_) throw ConfigError("fft: frame length != plan size");
    std::vector<std::complex<double>> x(n_);
    for (std::size_t i = 0; i < n_; ++i) x[i] = {frame[i], 0.0};
    forward(x);
    std::vector<double> mag(n_ / 2 + 1);
    for (std::size_t k = 0; k <= n_ / 2; ++k) mag[k] = std::abs(x[k]);
    return mag;
}

std::vector<double> fft_magnitude(const std::vector<double>& frame) {
    return Fft(frame.size()).magnitude(frame);
}

}  // namespace preictal
