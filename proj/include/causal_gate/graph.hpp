#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "causal_gate/types.hpp"

namespace causal_gate::graph {

/// Directed edge (parent index, child index).
using Edge = std::pair<std::size_t, std::size_t>;

/// Background knowledge attached to a DAG file: required and forbidden
/// edges plus an optional temporal ordering of node groups (tiers).
struct PriorKnowledge {
    std::set<Edge> required;
    std::set<Edge> forbidden;
    std::vector<std::vector<std::size_t>> tiers;

    bool empty() const { return required.empty() && forbidden.empty() && tiers.empty(); }
    friend bool operator==(const PriorKnowledge&, const PriorKnowledge&) = default;
};

/// Causal structure over named variables.
///
/// Construction does not check acyclicity; call validate() before using a
/// graph that came from outside the library. Edges keep the order they were
/// given in so that file round-trips are exact; equality compares edge sets.
class Dag {
public:
    Dag() = default;
    explicit Dag(std::vector<std::string> names, std::vector<VariableKind> kinds = {},
                 std::vector<Edge> edges = {});

    std::size_t num_nodes() const { return names_.size(); }
    std::size_t num_edges() const { return edges_.size(); }

    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(std::size_t node) const { return names_.at(node); }
    const std::vector<VariableKind>& kinds() const { return kinds_; }
    VariableKind kind(std::size_t node) const { return kinds_.at(node); }
    const std::vector<Edge>& edges() const { return edges_; }
    std::set<Edge> edge_set() const { return {edges_.begin(), edges_.end()}; }

    std::optional<std::size_t> index_of(std::string_view name) const;
    /// Throws InvalidNode when the name is unknown.
    std::size_t require_index(std::string_view name) const;

    bool has_edge(std::size_t parent, std::size_t child) const;
    /// Ascending node indices.
    std::vector<std::size_t> parents(std::size_t node) const;
    std::vector<std::size_t> children(std::size_t node) const;
    std::size_t degree(std::size_t node) const;

    /// Same nodes and prior knowledge, different edge list.
    Dag with_edges(std::vector<Edge> edges) const;

    const PriorKnowledge& prior() const { return prior_; }
    void set_prior(PriorKnowledge prior) { prior_ = std::move(prior); }

    friend bool operator==(const Dag& a, const Dag& b);

private:
    std::vector<std::string> names_;
    std::vector<VariableKind> kinds_;
    std::vector<Edge> edges_;
    PriorKnowledge prior_;
};

/// Throws CycleDetected (message lists one cycle), DanglingEdge or
/// DuplicateEdge; also checks the prior knowledge invariants (PriorConflict).
void validate(const Dag& dag);

/// Kahn's algorithm; among ready nodes the lowest index goes first.
std::vector<std::size_t> topological_order(const Dag& dag);

/// Removes every edge leaving `target`.
Dag prune_target_outgoing(const Dag& dag, std::size_t target);

/// Number of ordered pairs (u, v), u != v, on which the two graphs disagree
/// about the edge u -> v. A reversal therefore costs 2.
std::size_t hamming_distance(const Dag& a, const Dag& b);

/// Keeps ceil(keep_fraction * |E|) edges chosen uniformly at random.
Dag random_subgraph(const Dag& dag, double keep_fraction, std::uint64_t seed);

inline constexpr int kImposterMaxAttempts = 1000;

/// Applies `n_mutations` edits around `target`, each either reversing an
/// edge incident to the target or adding a new edge into it. A node pair is
/// edited at most once so edits never cancel. Proposals that would create a
/// cycle are redrawn, up to kImposterMaxAttempts per mutation.
Dag make_imposter(const Dag& dag, std::size_t target, int n_mutations, std::uint64_t seed);

inline constexpr std::size_t kMecMaxNodes = 10;
inline constexpr std::size_t kMecMaxEdges = 12;

/// Size of the Markov equivalence class, by enumerating every acyclic
/// orientation of the skeleton and keeping those with the same v-structures.
/// Throws TooLarge beyond kMecMaxNodes nodes or kMecMaxEdges edges.
std::size_t mec_size(const Dag& dag);

/// Unshielded colliders (a, c, b) with a < b, a -> c <- b and a, b non-adjacent.
std::set<std::tuple<std::size_t, std::size_t, std::size_t>> v_structures(const Dag& dag);

// JSON file format ---------------------------------------------------------

nlohmann::json to_json(const Dag& dag);
Dag dag_from_json(const nlohmann::json& doc);
Dag load_dag(const std::filesystem::path& path);
void save_dag(const Dag& dag, const std::filesystem::path& path);

}  // namespace causal_gate::graph
