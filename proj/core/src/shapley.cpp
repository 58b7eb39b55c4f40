#include "preictal/shapley.hpp"

#include <cmath>
#include <numeric>

namespace preictal {

ShapleyEstimate sample_shapley(int n_players, const CoalitionFn& eval, int n_perm,
                               std::uint64_t seed) {
    if (n_players < 1) throw ConfigError("sample_shapley: need at least one player");
    if (n_perm < 1) throw ConfigError("sample_shapley: n_perm must be >= 1");

    std::vector<double> sum(n_players, 0.0), sumsq(n_players, 0.0);
    double f_full = 0.0, f_baseline = 0.0;

    Rng root(seed);
    std::vector<std::size_t> order(n_players);
    for (int perm = 0; perm < n_perm; ++perm) {
        Rng rng = root.split(static_cast<std::uint64_t>(perm));
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);

        // prefix coalitions: baseline, then one player flipped in at a time
        std::vector<std::vector<char>> coalitions(static_cast<std::size_t>(n_players) + 1,
                                                  std::vector<char>(n_players, 0));
        for (int j = 0; j < n_players; ++j) {
            coalitions[j + 1] = coalitions[j];
            coalitions[j + 1][order[j]] = 1;
        }
        const std::vector<double> f = eval(coalitions);
        if (f.size() != coalitions.size())
            throw UsageError("sample_shapley: evaluator returned wrong count");

        for (int j = 0; j < n_players; ++j) {
            const double marginal = f[j + 1] - f[j];
            sum[order[j]] += marginal;
            sumsq[order[j]] += marginal * marginal;
        }
        if (perm == 0) {
            f_baseline = f.front();
            f_full = f.back();
        }
    }

    ShapleyEstimate est;
    est.n_perm = n_perm;
    est.f_full = f_full;
    est.f_baseline = f_baseline;
    est.values.resize(n_players);
    est.std_error.resize(n_players);
    for (int i = 0; i < n_players; ++i) {
        const double mean = sum[i] / n_perm;
        est.values[i] = mean;
        const double var = std::max(0.0, sumsq[i] / n_perm - mean * mean);
        est.std_error[i] = n_perm > 1 ? std::sqrt(var / n_perm) : std::sqrt(var);
    }
    return est;
}

std::vector<double> exact_shapley(int n_players, const CoalitionFn& eval) {
    if (n_players < 1 || n_players > 20)
        throw ConfigError("exact_shapley: player count out of enumerable range");
    const std::size_t n_subsets = std::size_t{1} << n_players;

    std::vector<std::vector<char>> coalitions(n_subsets, std::vector<char>(n_players, 0));
    for (std::size_t s = 0; s < n_subsets; ++s)
        for (int i = 0; i < n_players; ++i) coalitions[s][i] = (s >> i) & 1 ? 1 : 0;
    const std::vector<double> f = eval(coalitions);

    std::vector<double> fact(n_players + 1, 1.0);
    for (int i = 1; i <= n_players; ++i) fact[i] = fact[i - 1] * i;

    std::vector<double> phi(n_players, 0.0);
    for (std::size_t s = 0; s < n_subsets; ++s) {
        const int size = __builtin_popcountll(s);
        for (int i = 0; i < n_players; ++i) {
            if ((s >> i) & 1) continue;
            const double weight = fact[size] * fact[n_players - size - 1] / fact[n_players];
            phi[i] += weight * (f[s | (std::size_t{1} << i)] - f[s]);
        }
    }
    return phi;
}

double AttributionTensor::total() const {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
}

MfccTensor zeros_like(const MfccTensor& x) {
    MfccTensor z = x;
    std::fill(z.values.begin(), z.values.end(), 0.0);
    return z;
}

AttributionTensor shapley_attribution(SeizurePredictor& model, const MfccTensor& x,
                                      const MfccTensor& baseline, int n_perm,
                                      std::uint64_t seed) {
    if (x.n_channels != baseline.n_channels || x.n_coeffs != baseline.n_coeffs ||
        x.n_frames != baseline.n_frames)
        throw ShapeError("shapley_attribution: input/baseline shape mismatch");

    const int channels = static_cast<int>(x.n_channels);
    const int coeffs = static_cast<int>(x.n_coeffs);
    const int frames = static_cast<int>(x.n_frames);
    const int n_players = channels * frames;  // player (c,t) owns column (c,:,t)

    CoalitionFn eval = [&](const std::vector<std::vector<char>>& coalitions) {
        Tensor batch({static_cast<int>(coalitions.size()), channels, coeffs, frames});
        for (std::size_t b = 0; b < coalitions.size(); ++b) {
            double* dst = batch.data() + b * x.values.size();
            for (int c = 0; c < channels; ++c)
                for (int m = 0; m < coeffs; ++m)
                    for (int t = 0; t < frames; ++t) {
                        const std::size_t off =
                            (static_cast<std::size_t>(c) * coeffs + m) * frames + t;
                        const bool present = coalitions[b][c * frames + t] != 0;
                        dst[off] = present ? x.values[off] : baseline.values[off];
                    }
        }
        return model.predict(batch);
    };

    const ShapleyEstimate est = sample_shapley(n_players, eval, n_perm, seed);

    AttributionTensor out;
    out.subject_id = x.subject_id;
    out.t_start = x.t_start;
    out.n_channels = x.n_channels;
    out.n_coeffs = x.n_coeffs;
    out.n_frames = x.n_frames;
    out.f_input = est.f_full;
    out.f_baseline = est.f_baseline;
    out.n_permutations = n_perm;
    out.seed = seed;
    out.values.resize(x.values.size());
    for (int c = 0; c < channels; ++c)
        for (int t = 0; t < frames; ++t) {
            const double share = est.values[c * frames + t] / static_cast<double>(coeffs);
            for (int m = 0; m < coeffs; ++m)
                out.values[(static_cast<std::size_t>(c) * coeffs + m) * frames + t] = share;
        }
    return out;
}

}  // namespace preictal
