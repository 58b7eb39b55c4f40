#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "preictal/mfcc.hpp"
#include "preictal/model.hpp"

namespace preictal {

// Evaluates a batch of coalitions. Each coalition is a mask over players
// (1 = player present, i.e. taking its value from the input rather than the
// baseline). Returns one model output per coalition.
using CoalitionFn =
    std::function<std::vector<double>(const std::vector<std::vector<char>>&)>;

struct ShapleyEstimate {
    std::vector<double> values;     // mean marginal contribution per player
    std::vector<double> std_error;  // sampling standard error per player
    double f_full = 0.0;
    double f_baseline = 0.0;
    int n_perm = 0;
};

// Permutation-sampling Shapley values. Each permutation walks players from
// the baseline to the full input and accrues marginal output changes; the
// marginals of one permutation telescope, so sum(values) = f_full - f_baseline
// exactly (up to float rounding). Accumulation order is fixed by permutation
// index regardless of how eval batches internally.
ShapleyEstimate sample_shapley(int n_players, const CoalitionFn& eval, int n_perm,
                               std::uint64_t seed);

// Exact Shapley values by enumerating all 2^n coalitions (test-scale oracle).
std::vector<double> exact_shapley(int n_players, const CoalitionFn& eval);

struct AttributionTensor {
    std::string subject_id;
    double t_start = 0.0;
    std::size_t n_channels = 0, n_coeffs = 0, n_frames = 0;
    std::vector<double> values;  // same layout as MfccTensor
    double f_input = 0.0;
    double f_baseline = 0.0;
    int n_permutations = 0;
    std::uint64_t seed = 0;

    double at(std::size_t c, std::size_t m, std::size_t t) const {
        return values[(c * n_coeffs + m) * n_frames + t];
    }
    double total() const;
};

// Players are (channel, frame) cells, each owning all n_coeffs coefficients of
// its column; the per-player attribution is spread uniformly over those
// coefficients so the output matches the input tensor's shape.
AttributionTensor shapley_attribution(SeizurePredictor& model, const MfccTensor& x,
                                      const MfccTensor& baseline, int n_perm,
                                      std::uint64_t seed);

// all-zeros MFCC tensor shaped like x (the silence-equivalent baseline)
MfccTensor zeros_like(const MfccTensor& x);

}  // namespace preictal
