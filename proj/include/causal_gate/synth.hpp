#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "causal_gate/data.hpp"
#include "causal_gate/graph.hpp"

namespace causal_gate::synth {

struct Gaussian {
    double mean = 0.0;
    double variance = 1.0;

    friend bool operator==(const Gaussian&, const Gaussian&) = default;
};

/// Roots are pure noise; every other node is one of the two mechanisms.
enum class FunctionKind { noise, linear, exponential };

/// Parent values are clipped to this range before exponentiation.
inline constexpr double kExpClip = 10.0;

/// Structural causal model over a DAG.
///
/// Node values follow x = sum_j s_j g(pa_j) + u with g the identity
/// (linear) or exp(clip(.)) (exponential). Sign s_j is +1 when parent j
/// sits at an odd position of the random enumeration and -1 at an even one
/// (positions counted from 1).
struct Scm {
    graph::Dag dag;
    std::vector<std::size_t> enumeration;  // 1-based position of each node
    std::vector<FunctionKind> kinds;
    std::vector<Gaussian> noise;

    int sign_of(std::size_t parent) const { return enumeration.at(parent) % 2 == 1 ? 1 : -1; }

    friend bool operator==(const Scm&, const Scm&) = default;
};

struct Perturbation {
    std::vector<std::size_t> nodes;
    Gaussian noise{1.0, 2.0};
};

enum class KindPolicy { random, all_linear, all_exponential };

/// n >= 3 nodes named x0..x{n-1}; e ~ U{n, ..., n(n-1)/2} distinct edges drawn
/// from the forward pairs of a random node permutation.
graph::Dag random_dag(std::size_t n, std::uint64_t seed);

Scm build_scm(const graph::Dag& dag, std::uint64_t seed, KindPolicy policy = KindPolicy::random);

/// Ancestral sampling with the SCM's own noise laws, except perturbed nodes
/// which draw from the perturbation law.
data::Table sample(const Scm& scm, std::size_t n_rows, std::uint64_t seed,
                   const std::optional<Perturbation>& perturbation = std::nullopt);

/// Same, with every node's base law replaced by `base_noise`.
data::Table sample(const Scm& scm, std::size_t n_rows, const Gaussian& base_noise,
                   const std::optional<Perturbation>& perturbation, std::uint64_t seed);

inline constexpr double kSuiteMeans[3] = {0.5, 1.0, 1.5};
inline constexpr double kSuiteVariances[3] = {1.5, 2.0, 2.5};

/// Nine test sets, one per (mean, variance) pair of the grid above, with
/// every node perturbed.
std::vector<data::Table> motivating_suite(const Scm& scm, std::uint64_t seed, std::size_t rows = 2000);

/// Replaces a continuous target with Bernoulli(sigmoid(x)) labels.
data::Table bernoulli_target(const data::Table& table, std::string_view target, std::uint64_t seed);

double sigmoid(double x);

nlohmann::json to_json(const Scm& scm);
Scm scm_from_json(const nlohmann::json& doc);

}  // namespace causal_gate::synth
