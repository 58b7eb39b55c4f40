#include "preictal/dataset.hpp"

#include <algorithm>

namespace preictal {

Tensor stack_batch(const FeatureDataset& data, const std::vector<std::size_t>& idx) {
    if (idx.empty()) throw DataError("stack_batch: empty selection");
    const MfccTensor& first = data[idx[0]];
    const int c = static_cast<int>(first.n_channels);
    const int m = static_cast<int>(first.n_coeffs);
    const int t = static_cast<int>(first.n_frames);
    Tensor batch({static_cast<int>(idx.size()), c, m, t});
    const std::size_t item = first.values.size();
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const MfccTensor& x = data[idx[i]];
        if (x.values.size() != item) throw ShapeError("stack_batch: inconsistent tensor shapes");
        std::copy(x.values.begin(), x.values.end(), batch.data() + i * item);
    }
    return batch;
}

Tensor label_tensor(const FeatureDataset& data, const std::vector<std::size_t>& idx) {
    Tensor y({static_cast<int>(idx.size())});
    for (std::size_t i = 0; i < idx.size(); ++i) y[i] = static_cast<double>(data[idx[i]].label);
    return y;
}

std::vector<int> labels_of(const FeatureDataset& data) {
    std::vector<int> out;
    out.reserve(data.size());
    for (const auto& x : data) out.push_back(x.label);
    return out;
}

std::vector<std::string> subjects_of(const FeatureDataset& data) {
    std::vector<std::string> out;
    for (const auto& x : data)
        if (std::find(out.begin(), out.end(), x.subject_id) == out.end())
            out.push_back(x.subject_id);
    std::sort(out.begin(), out.end());
    return out;
}

std::map<std::string, std::vector<std::size_t>> indices_by_subject(const FeatureDataset& data) {
    std::map<std::string, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < data.size(); ++i) out[data[i].subject_id].push_back(i);
    return out;
}

FeatureDataset subset(const FeatureDataset& data, const std::vector<std::size_t>& idx) {
    FeatureDataset out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(data[i]);
    return out;
}

}  // namespace preictal
