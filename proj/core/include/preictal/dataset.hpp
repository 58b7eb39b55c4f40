#pragma once

#include <map>
#include <string>
#include <vector>

#include "preictal/mfcc.hpp"
#include "preictal/tensor.hpp"

namespace preictal {

using FeatureDataset = std::vector<MfccTensor>;

// [N, C, M, T] batch tensor from the selected items
Tensor stack_batch(const FeatureDataset& data, const std::vector<std::size_t>& idx);
Tensor label_tensor(const FeatureDataset& data, const std::vector<std::size_t>& idx);

std::vector<int> labels_of(const FeatureDataset& data);
std::vector<std::string> subjects_of(const FeatureDataset& data);  // sorted unique
std::map<std::string, std::vector<std::size_t>> indices_by_subject(const FeatureDataset& data);
FeatureDataset subset(const FeatureDataset& data, const std::vector<std::size_t>& idx);

}  // namespace preictal
