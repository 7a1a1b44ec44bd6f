#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "causal_gate/data.hpp"
#include "causal_gate/graph.hpp"
#include "causal_gate/types.hpp"

namespace causal_gate::cam {

enum class HMetric { mse, auroc };
enum class HDirection { minimize, maximize };
enum class RankKey { r, f, h };

/// How the causal-assurance term and the predictive error are combined.
///
/// A fixed lambda always wins over the estimated form
/// E(Y_f) / (gamma * E(Y_h)); estimated mode needs both expectations.
struct CamConfig {
    std::optional<double> fixed_lambda = 1.0;
    std::size_t gamma = 1;
    std::optional<double> expected_yf;
    std::optional<double> expected_yh;
    HMetric h_metric = HMetric::mse;
    HDirection h_direction = HDirection::minimize;
    /// Average f and h over k contiguous folds of a seeded permutation of the
    /// selection set. k = 1 is the whole set in its original order.
    std::optional<std::size_t> k_folds;
    std::uint64_t fold_seed = 0;
    /// Seed for turning predicted probabilities into labels when the target is discrete.
    std::uint64_t label_seed = 0;

    void validate() const;
    static CamConfig for_metric(HMetric metric);
};

/// expected_yf / (gamma * expected_yh).
double estimate_lambda(const CamConfig& config);
/// Fixed lambda if set, otherwise the estimate.
double resolve_lambda(const CamConfig& config);

struct ModelScore {
    std::string model_id;
    double f = 0.0;  // causal-assurance term
    double h = 0.0;  // predictive error (or score, when maximized)
    double r = 0.0;  // combined; lower is better in both directions
};

/// r = lambda f + h when minimizing h, lambda f - h when maximizing.
ModelScore cam_score(double f, double h, const CamConfig& config, std::string model_id = {});

struct Selection {
    std::string best_model_id;
    std::vector<ModelScore> scores;  // input order
    double lambda = 0.0;
};

/// Predicted probabilities to 0/1 labels via Bernoulli draws. Every model
/// sees the same uniform per row, so labels differ only where the
/// probabilities do.
std::vector<double> labels_from_probabilities(std::span<const double> probabilities, std::uint64_t seed);

/// Causal-assurance selection over a population of models.
///
/// For each model: build D' by substituting its predictions for the target
/// in d_sel (sampling labels first when the target is discrete), compute f
/// on the target-pruned DAG, compute h against the true target column, and
/// combine. The argmin of r wins; ties go to the lowest model id. Models are
/// scored on up to `workers` threads; results do not depend on the count.
Selection select(std::span<const ModelPredictions> models, const data::Table& d_sel, const graph::Dag& dag,
                 std::string_view target, const CamConfig& config, std::size_t workers = 1);

/// Model ids ascending by the key (for h, best first given the direction);
/// ties broken by model id.
std::vector<std::string> rank(std::span<const ModelScore> scores, RankKey key,
                              HDirection direction = HDirection::minimize);

/// Results file: per-model {model_id, f, h, r, rank_by_r, rank_by_h} plus a
/// config echo. `seed` is recorded for audit only.
nlohmann::json selection_to_json(const Selection& selection, const CamConfig& config, std::string_view target,
                                 std::uint64_t seed);
std::vector<ModelScore> scores_from_json(const nlohmann::json& doc);

std::string_view to_string(HMetric metric);
HMetric h_metric_from_string(std::string_view s);
std::string_view to_string(RankKey key);
RankKey rank_key_from_string(std::string_view s);

}  // namespace causal_gate::cam
