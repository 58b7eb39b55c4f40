#pragma once

#include <complex>
#include <vector>

#include "preictal/errors.hpp"

namespace preictal {

// Iterative radix-2 FFT with precomputed twiddles and bit-reversal table.
class Fft {
public:
    explicit Fft(std::size_t n);  // n must be a power of two

    std::size_t size() const { return n_; }

    // in-place decimation-in-time transform
    void forward(std::vector<std::complex<double>>& x) const;

    // |X[k]| for k = 0..n/2 of a real frame
    std::vector<double> magnitude(const std::vector<double>& frame) const;

private:
    std::size_t n_;
    std::vector<std::size_t> bitrev_;
    std::vector<std::complex<double>> twiddle_;  // e^{-2pi i k / n}, k < n/2
};

std::vector<double> fft_magnitude(const std::vector<double>& frame);

}  // namespace preictal
