#include "preictal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace preictal {

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    long pos = 0, neg = 0;
    for (int l : labels) (l == 1 ? pos : neg)++;
    if (pos == 0 || neg == 0) return 0.5;

    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double area = 0.0;
    double tpr_prev = 0.0, fpr_prev = 0.0;
    long tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < idx.size()) {
        const double v = scores[idx[i]];
        while (i < idx.size() && scores[idx[i]] == v) {  // all samples tied at this threshold
            (labels[idx[i]] == 1 ? tp : fp)++;
            ++i;
        }
        const double tpr = static_cast<double>(tp) / pos;
        const double fpr = static_cast<double>(fp) / neg;
        area += (fpr - fpr_prev) * (tpr + tpr_prev) / 2.0;
        tpr_prev = tpr;
        fpr_prev = fpr;
    }
    area += (1.0 - fpr_prev) * (1.0 + tpr_prev) / 2.0;
    return area;
}

Metrics evaluate_scores(const std::vector<double>& scores, const std::vector<int>& labels,
                        double threshold) {
    if (scores.size() != labels.size())
        throw ShapeError("evaluate_scores: score/label count mismatch");
    Metrics m;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= threshold;
        if (labels[i] == 1)
            pred ? ++m.tp : ++m.fn;
        else
            pred ? ++m.fp : ++m.tn;
    }
    auto ratio = [](long num, long den) { return den > 0 ? static_cast<double>(num) / den : 0.0; };
    m.accuracy = ratio(m.tp + m.tn, m.total());
    m.sensitivity = ratio(m.tp, m.tp + m.fn);
    m.specificity = ratio(m.tn, m.tn + m.fp);
    m.f1 = ratio(2 * m.tp, 2 * m.tp + m.fp + m.fn);
    m.roc_auc = roc_auc(scores, labels);
    return m;
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
    if (xs.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return {mean, std::sqrt(var)};
}

}  // namespace preictal
