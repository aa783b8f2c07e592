#include "mhnet/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace mhnet {

namespace {

void check(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("metrics: scores and labels differ in length");
    if (scores.empty()) throw std::invalid_argument("metrics: no examples");
    for (int y : labels)
        if (y != 0 && y != 1) throw std::invalid_argument("metrics: label " + std::to_string(y) + " is not 0 or 1");
}

} // namespace

Confusion confusion(const std::vector<double>& scores, const std::vector<int>& labels) {
    check(scores, labels);
    Confusion c;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= 0.5;
        if (labels[i] == 1) (pred ? c.tp : c.fn)++;
        else (pred ? c.fp : c.tn)++;
    }
    return c;
}

Metrics metrics_from_confusion(const Confusion& c) {
    Metrics m;
    const double total = static_cast<double>(c.tp + c.fn + c.tn + c.fp);
    if (total == 0) throw std::invalid_argument("metrics: empty confusion matrix");
    m.acc = static_cast<double>(c.tp + c.tn) / total;
    if (c.tp + c.fn > 0) m.sen = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    if (c.tn + c.fp > 0) m.spec = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
    return m;
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    check(scores, labels);
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Sum of midranks of the positives; ties share the mean rank.
    double rank_sum = 0.0;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + j + 1);
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) rank_sum += mid, ++pos;
        i = j;
    }
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) throw std::invalid_argument("metrics: AUC undefined for single-class labels");
    const double p = static_cast<double>(pos);
    return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

Metrics compute_metrics(const std::vector<double>& scores, const std::vector<int>& labels) {
    Metrics m = metrics_from_confusion(confusion(scores, labels));
    if (m.sen && m.spec) {
        m.auc = auc(scores, labels);
        m.avg = (m.acc + *m.sen + *m.spec + *m.auc) / 4.0;
    }
    return m;
}

} // namespace mhnet
