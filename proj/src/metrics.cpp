#include "causal_gate/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "causal_gate/error.hpp"

namespace causal_gate::eval {

double mse(std::span<const double> truth, std::span<const double> pred) {
    if (truth.size() != pred.size() || truth.empty())
        throw Error(ErrorCode::LengthMismatch, "mse needs equal non-empty vectors (" + std::to_string(truth.size()) +
                                                   " vs " + std::to_string(pred.size()) + ")");
    double sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = pred[i] - truth[i];
        sum += d * d;
    }
    return sum / static_cast<double>(truth.size());
}

double auroc(std::span<const double> labels, std::span<const double> scores) {
    if (labels.size() != scores.size())
        throw Error(ErrorCode::LengthMismatch, "auroc needs one score per label");
    const std::size_t n = labels.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum of midranks of the positives.
    double positive_rank_sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] != 0.0) {
                positive_rank_sum += midrank;
                ++positives;
            }
        }
        i = j;
    }
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) throw Error(ErrorCode::SingleClass, "auroc needs both classes present");
    const double np = static_cast<double>(positives);
    const double nn = static_cast<double>(negatives);
    return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

}  // namespace causal_gate::eval
