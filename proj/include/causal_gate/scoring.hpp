#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "causal_gate/data.hpp"
#include "causal_gate/graph.hpp"

namespace causal_gate::scoring {

/// Residual variances are clamped to this before taking the log.
inline constexpr double kVarianceFloor = 1e-12;
/// Diagonal jitter added to singular normal equations.
inline constexpr double kRidgeJitter = 1e-8;
inline constexpr int kLogisticMaxIterations = 100;
inline constexpr double kLogisticGradientTolerance = 1e-8;

struct EntropyDiagnostics {
    /// Discrete-parent cells too small for their own regression.
    std::size_t fallback_cells = 0;
};

/// Plug-in H(X | PA) in nats from maximum-likelihood cell frequencies.
/// X and every parent must be discrete (NotDiscrete otherwise).
double cond_entropy_discrete(const data::Table& table, std::size_t x, std::span<const std::size_t> parents);

/// Linear-Gaussian H(X | PA) = 0.5 ln(2 pi e sigma^2), sigma^2 the ML residual
/// variance of an OLS fit with intercept. Requires N > |PA| + 1.
double cond_entropy_gaussian(const data::Table& table, std::size_t x, std::span<const std::size_t> parents);

/// Mixed parent sets. A continuous child is regressed on its continuous
/// parents separately inside each discrete-parent cell and the cell
/// entropies are averaged by cell frequency; cells with fewer than
/// |continuous parents| + 2 rows use the pooled fit. A discrete child with
/// continuous parents gets a multinomial logistic fit (damped Newton) and
/// the mean negative log-probability of the observed class.
double cond_entropy_mixed(const data::Table& table, std::size_t x, std::span<const std::size_t> parents,
                          EntropyDiagnostics* diagnostics = nullptr);

/// Picks the estimator from the column kinds of x and its parents.
double cond_entropy(const data::Table& table, std::size_t x, std::span<const std::size_t> parents,
                    EntropyDiagnostics* diagnostics = nullptr);

struct ScoreReport {
    /// In DAG node order.
    std::vector<std::pair<std::string, double>> per_node_entropy;
    double log_likelihood = 0.0;
    double bic = 0.0;
    std::size_t n_rows = 0;
    std::size_t dimension = 0;
    std::size_t fallback_cells = 0;
};

/// Free parameters: discrete node (card - 1) x (1 + |continuous parents|),
/// continuous node |continuous parents| + 2; both multiplied by the number
/// of discrete-parent configurations.
std::size_t dimension(const graph::Dag& dag, const data::Table& table);

/// LL(G | D) = -N sum_i H(X_i | PA_i) and BIC = -LL + (log2 N / 2) ||G||.
/// Every DAG node must be a table column (SchemaMismatch).
ScoreReport log_likelihood(const graph::Dag& dag, const data::Table& table);

/// The part of -LL that depends on the target's values: N H(target | PA)
/// after removing the target's outgoing edges, or 0 for a parentless target.
double causal_assurance_term(const graph::Dag& dag, std::string_view target, const data::Table& table_with_predictions);

nlohmann::json to_json(const ScoreReport& report);

}  // namespace causal_gate::scoring
