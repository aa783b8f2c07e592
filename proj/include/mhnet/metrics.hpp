#pragma once

#include <optional>
#include <vector>

namespace mhnet {

struct Confusion {
    std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
};

/// Positive prediction when score >= 0.5.
Confusion confusion(const std::vector<double>& scores, const std::vector<int>& labels);

struct Metrics {
    double acc = 0.0;
    /// Undefined without positives (sen), negatives (spec) or both (auc).
    std::optional<double> sen;
    std::optional<double> spec;
    std::optional<double> auc;
    /// Mean of acc, sen, spec and auc when all four are defined.
    std::optional<double> avg;
};

Metrics metrics_from_confusion(const Confusion& c);
Metrics compute_metrics(const std::vector<double>& scores, const std::vector<int>& labels);

/// Mann-Whitney statistic: P(score_pos > score_neg) + 0.5 P(tie). Throws on single-class labels.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

} // namespace mhnet
