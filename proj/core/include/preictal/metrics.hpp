#pragma once

#include <vector>

#include "preictal/errors.hpp"

namespace preictal {

struct Metrics {
    double accuracy = 0.0;
    double sensitivity = 0.0;  // TP / (TP + FN)
    double specificity = 0.0;  // TN / (TN + FP)
    double f1 = 0.0;           // 2TP / (2TP + FP + FN)
    double roc_auc = 0.5;
    long tp = 0, fp = 0, tn = 0, fn = 0;

    long total() const { return tp + fp + tn + fn; }
};

// Counts at the given threshold (label 1 iff score >= threshold). Ratios with
// an empty denominator are reported as 0; AUC with a single class present is
// reported as 0.5.
Metrics evaluate_scores(const std::vector<double>& scores, const std::vector<int>& labels,
                        double threshold = 0.5);

// trapezoidal ROC integration over all unique score thresholds; ties
// contribute diagonal segments, so this equals P(s+ > s-) + 0.5 P(s+ = s-)
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// mean and population standard deviation
std::pair<double, double> mean_std(const std::vector<double>& xs);

}  // namespace preictal
