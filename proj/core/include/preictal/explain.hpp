#pragma once

#include <string>
#include <vector>

#include "preictal/dataset.hpp"
#include "preictal/shapley.hpp"

namespace preictal {

// Withheld explanation test set: per subject, the chronologically first
// n_per_class preictal segments plus n_per_class seeded-random interictal
// segments. The remainder (plus all data of skipped subjects) is split into a
// retraining train/val pool.
struct ExplainSplit {
    std::vector<std::size_t> test_idx;
    std::vector<std::size_t> retrain_train_idx;
    std::vector<std::size_t> retrain_val_idx;
    std::vector<std::string> skipped_subjects;  // fewer than n_per_class in some class
};

ExplainSplit build_explain_testset(const FeatureDataset& data, int n_per_class = 6,
                                   double train_fraction = 0.7, std::uint64_t seed = 0);

// Channel importance I_c = mean(S_c) / std(S_c) over the per-channel slice of
// the mean of the first three preictal attribution tensors; population std,
// with I_c = 0 when std < 1e-12. Postprocessing: clip negatives, drop the ECG
// row (last channel), min-max normalize to [0,1].
struct ChannelImportance {
    std::vector<double> raw;        // one per channel, ECG included
    std::vector<double> processed;  // EEG channels only, in [0,1]
};

ChannelImportance channel_importance(const std::vector<AttributionTensor>& preictal_attrs);

// postprocessing alone (clip -> drop last -> min-max), exposed for tests
std::vector<double> postprocess_importance(const std::vector<double>& raw);

// Attribution artifact, one file per subject. Layout: magic "PIATT001",
// u32 version (1), u32 tensor count, then per tensor: f64 t_start, f64 f_input,
// f64 f_baseline, u32 n_permutations, u64 seed, u32 C, u32 M, u32 T, f64 values.
void write_attribution_file(const std::vector<AttributionTensor>& attrs, const std::string& path);
std::vector<AttributionTensor> read_attribution_file(const std::string& path);

}  // namespace preictal
