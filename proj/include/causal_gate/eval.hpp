#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "causal_gate/cam.hpp"
#include "causal_gate/data.hpp"
#include "causal_gate/metrics.hpp"

namespace causal_gate::eval {

/// ceil(fraction * n), at least 1.
std::size_t top_count(std::size_t n, double fraction);

/// Rank the models ascending by `key` (h best-first under `direction`), take
/// the first top_count of them and average their test metric. `test_metric`
/// is aligned with `scores`.
double top_fraction_mean(std::span<const cam::ModelScore> scores, cam::RankKey key, std::span<const double> test_metric,
                         double fraction = 0.1, cam::HDirection direction = cam::HDirection::minimize);

/// Pairs i < j with values[i] > values[j]; ties do not count. O(n log n).
std::uint64_t inversion_count(std::span<const double> values);
std::uint64_t inversion_count_brute(std::span<const double> values);

/// inversion_count / (n (n - 1) / 2); TooFewModels when n < 2.
double inversion_count_normalized(std::span<const double> values_in_rank_order);

/// Test metrics rearranged into the order of `ranking` (model ids).
std::vector<double> in_rank_order(std::span<const std::string> ranking, std::span<const cam::ModelScore> scores,
                                  std::span<const double> test_metric);

/// Per-model mean MSE over the suite. `predict(m, table)` yields model m's
/// predictions for a table.
std::vector<double> perturbed_average(std::size_t n_models, std::span<const data::Table> suite, std::string_view target,
                                      const std::function<std::vector<double>(std::size_t, const data::Table&)>& predict);

/// Spearman rank correlation with average ranks for ties. Zero when either
/// side is constant.
double spearman(std::span<const double> a, std::span<const double> b);

/// One way of selecting and ranking a model population.
struct SelectionSummary {
    std::vector<std::string> ranking;  // best first
    double top_mean = 0.0;             // mean test metric of the top fraction
    double ic = 0.0;                   // normalized inversion count against test performance
};

/// For MSE, lower test values are better; for AUROC higher is, so the
/// inversion count is taken on the negated metric.
SelectionSummary summarize(std::span<const cam::ModelScore> scores, cam::RankKey key, std::span<const double> test_metric,
                           cam::HMetric metric, double fraction = 0.1);

struct ModelRow {
    std::string model_id;
    double f = 0.0;
    double h = 0.0;  // selection-set metric
    double r = 0.0;
    double test = 0.0;
};

struct ExperimentReport {
    cam::HMetric metric = cam::HMetric::mse;
    double fraction = 0.1;
    SelectionSummary cam;
    SelectionSummary stat;  // selection by h alone
    /// Positive favors CAM in both fields.
    double delta_top = 0.0;
    double delta_ic = 0.0;
    std::vector<ModelRow> models;
};

/// Combines two summaries over the same population (PopulationMismatch otherwise).
ExperimentReport delta_report(const SelectionSummary& cam_result, const SelectionSummary& stat_result,
                              cam::HMetric metric);

/// Full report from per-model scores and test metrics.
ExperimentReport build_report(std::span<const cam::ModelScore> scores, std::span<const double> test_metric,
                              cam::HMetric metric, double fraction = 0.1);

nlohmann::json to_json(const ExperimentReport& report);
/// One row per model.
std::string to_csv(const ExperimentReport& report);

}  // namespace causal_gate::eval
