#pragma once

// Feature-level synthetic datasets for training/protocol tests. Building
// MfccTensor fixtures directly keeps these tests independent of the signal
// pipeline.

#include <string>

#include "preictal/dataset.hpp"
#include "preictal/rng.hpp"

namespace preictal::testfix {

// Linearly separable two-class set: preictal tensors carry a +sep bump on one
// coefficient row across all channels, interictal a -sep bump.
inline FeatureDataset gaussian_features(int n_subjects, int per_class, std::uint64_t seed,
                                        double sep = 2.0, int channels = 19, int coeffs = 20,
                                        int frames = 11) {
    FeatureDataset data;
    Rng root(seed);
    for (int s = 0; s < n_subjects; ++s) {
        Rng rng = root.split(static_cast<std::uint64_t>(s));
        char id[16];
        std::snprintf(id, sizeof(id), "s%02d", s + 1);
        for (int label = 0; label <= 1; ++label) {
            for (int i = 0; i < per_class; ++i) {
                MfccTensor t;
                t.subject_id = id;
                t.label = label;
                t.t_start = label == 1 ? 1000.0 + 5.0 * i : 5.0 * i;
                t.n_channels = static_cast<std::size_t>(channels);
                t.n_coeffs = static_cast<std::size_t>(coeffs);
                t.n_frames = static_cast<std::size_t>(frames);
                t.values.resize(t.n_channels * t.n_coeffs * t.n_frames);
                for (double& v : t.values) v = rng.normal();
                const double bump = label == 1 ? sep : -sep;
                for (int c = 0; c < channels; ++c)
                    for (int f = 0; f < frames; ++f) t.at(c, 2, f) += bump;
                data.push_back(std::move(t));
            }
        }
    }
    return data;
}

// Subject-shifted set: subject s marks preictal segments on coefficient row
// a(s) and interictal segments on a(s+1), so the row-to-class mapping flips
// between neighbouring subjects. Pooled training works per subject, but a
// model trained without subject s systematically misreads s's markers.
inline FeatureDataset shifted_features(int n_subjects, int per_class, std::uint64_t seed,
                                       double sep = 3.0, int channels = 19, int coeffs = 20,
                                       int frames = 11) {
    FeatureDataset data;
    Rng root(seed);
    auto marker_row = [&](int subject) { return 2 + (subject % n_subjects); };
    for (int s = 0; s < n_subjects; ++s) {
        Rng rng = root.split(static_cast<std::uint64_t>(s));
        char id[16];
        std::snprintf(id, sizeof(id), "s%02d", s + 1);
        for (int label = 0; label <= 1; ++label) {
            const int row = label == 1 ? marker_row(s) : marker_row(s + 1);
            for (int i = 0; i < per_class; ++i) {
                MfccTensor t;
                t.subject_id = id;
                t.label = label;
                t.t_start = label == 1 ? 1000.0 + 5.0 * i : 5.0 * i;
                t.n_channels = static_cast<std::size_t>(channels);
                t.n_coeffs = static_cast<std::size_t>(coeffs);
                t.n_frames = static_cast<std::size_t>(frames);
                t.values.resize(t.n_channels * t.n_coeffs * t.n_frames);
                for (double& v : t.values) v = rng.normal() * 0.3;
                for (int c = 0; c < channels; ++c)
                    for (int f = 0; f < frames; ++f) t.at(c, static_cast<std::size_t>(row), f) += sep;
                data.push_back(std::move(t));
            }
        }
    }
    return data;
}

}  // namespace preictal::testfix
