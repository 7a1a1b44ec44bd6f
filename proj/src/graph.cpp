#include "causal_gate/graph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <sstream>
#include <tuple>

#include "causal_gate/error.hpp"
#include "causal_gate/io.hpp"
#include "causal_gate/rng.hpp"

namespace causal_gate::graph {

Dag::Dag(std::vector<std::string> names, std::vector<VariableKind> kinds, std::vector<Edge> edges)
    : names_(std::move(names)), kinds_(std::move(kinds)), edges_(std::move(edges)) {
    if (kinds_.empty()) kinds_.assign(names_.size(), VariableKind::continuous());
    if (kinds_.size() != names_.size())
        throw Error(ErrorCode::LengthMismatch, "node kinds and names differ in length");
}

std::optional<std::size_t> Dag::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return i;
    return std::nullopt;
}

std::size_t Dag::require_index(std::string_view name) const {
    if (auto idx = index_of(name)) return *idx;
    throw Error(ErrorCode::InvalidNode, "unknown node '" + std::string(name) + "'");
}

bool Dag::has_edge(std::size_t parent, std::size_t child) const {
    return std::find(edges_.begin(), edges_.end(), Edge{parent, child}) != edges_.end();
}

std::vector<std::size_t> Dag::parents(std::size_t node) const {
    std::vector<std::size_t> out;
    for (const auto& [u, v] : edges_)
        if (v == node) out.push_back(u);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<std::size_t> Dag::children(std::size_t node) const {
    std::vector<std::size_t> out;
    for (const auto& [u, v] : edges_)
        if (u == node) out.push_back(v);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::size_t Dag::degree(std::size_t node) const {
    return static_cast<std::size_t>(
        std::count_if(edges_.begin(), edges_.end(), [&](const Edge& e) { return e.first == node || e.second == node; }));
}

Dag Dag::with_edges(std::vector<Edge> edges) const {
    Dag out = *this;
    out.edges_ = std::move(edges);
    return out;
}

bool operator==(const Dag& a, const Dag& b) {
    return a.names_ == b.names_ && a.kinds_ == b.kinds_ && a.edge_set() == b.edge_set() && a.prior_ == b.prior_;
}

namespace {

std::vector<std::vector<std::size_t>> adjacency(std::size_t n, const std::vector<Edge>& edges) {
    std::vector<std::vector<std::size_t>> out(n);
    for (const auto& [u, v] : edges) out[u].push_back(v);
    for (auto& row : out) std::sort(row.begin(), row.end());
    return out;
}

// Returns one directed cycle as a node sequence, or empty when acyclic.
std::vector<std::size_t> find_cycle(std::size_t n, const std::vector<Edge>& edges) {
    const auto adj = adjacency(n, edges);
    enum class Mark { white, grey, black };
    std::vector<Mark> mark(n, Mark::white);
    std::vector<std::size_t> stack;
    std::vector<std::size_t> cycle;

    std::function<bool(std::size_t)> visit = [&](std::size_t u) {
        mark[u] = Mark::grey;
        stack.push_back(u);
        for (std::size_t v : adj[u]) {
            if (mark[v] == Mark::grey) {
                auto it = std::find(stack.begin(), stack.end(), v);
                cycle.assign(it, stack.end());
                cycle.push_back(v);
                return true;
            }
            if (mark[v] == Mark::white && visit(v)) return true;
        }
        stack.pop_back();
        mark[u] = Mark::black;
        return false;
    };
    for (std::size_t u = 0; u < n; ++u)
        if (mark[u] == Mark::white && visit(u)) break;
    return cycle;
}

bool is_acyclic(std::size_t n, const std::vector<Edge>& edges) {
    std::vector<std::size_t> indegree(n, 0);
    const auto adj = adjacency(n, edges);
    for (const auto& [u, v] : edges) ++indegree[v];
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i)
        if (indegree[i] == 0) ready.push_back(i);
    std::size_t seen = 0;
    while (!ready.empty()) {
        const std::size_t u = ready.back();
        ready.pop_back();
        ++seen;
        for (std::size_t v : adj[u])
            if (--indegree[v] == 0) ready.push_back(v);
    }
    return seen == n;
}

[[noreturn]] void throw_cycle(const Dag& dag, const std::vector<std::size_t>& cycle) {
    std::ostringstream msg;
    msg << "cycle:";
    for (std::size_t i = 0; i < cycle.size(); ++i) msg << (i ? " -> " : " ") << dag.name(cycle[i]);
    throw Error(ErrorCode::CycleDetected, msg.str());
}

void validate_prior(const Dag& dag) {
    const auto& pk = dag.prior();
    const std::size_t n = dag.num_nodes();
    auto check_range = [&](const Edge& e) {
        if (e.first >= n || e.second >= n)
            throw Error(ErrorCode::DanglingEdge, "prior-knowledge edge references an unknown node");
    };
    for (const auto& e : pk.required) check_range(e);
    for (const auto& e : pk.forbidden) check_range(e);
    for (const auto& e : pk.required)
        if (pk.forbidden.count(e))
            throw Error(ErrorCode::PriorConflict,
                        "edge " + dag.name(e.first) + " -> " + dag.name(e.second) + " is both required and forbidden");
    if (pk.tiers.empty()) return;
    std::vector<std::optional<std::size_t>> tier_of(n);
    for (std::size_t t = 0; t < pk.tiers.size(); ++t) {
        for (std::size_t node : pk.tiers[t]) {
            if (node >= n) throw Error(ErrorCode::InvalidNode, "tier references an unknown node");
            if (tier_of[node]) throw Error(ErrorCode::PriorConflict, "node " + dag.name(node) + " is in two tiers");
            tier_of[node] = t;
        }
    }
    for (const auto& [u, v] : pk.required) {
        if (tier_of[u] && tier_of[v] && *tier_of[u] > *tier_of[v])
            throw Error(ErrorCode::PriorConflict,
                        "required edge " + dag.name(u) + " -> " + dag.name(v) + " goes against tier order");
    }
}

}  // namespace

void validate(const Dag& dag) {
    const std::size_t n = dag.num_nodes();
    std::set<Edge> seen;
    for (const auto& e : dag.edges()) {
        if (e.first >= n || e.second >= n) {
            std::ostringstream msg;
            msg << "edge (" << e.first << ", " << e.second << ") references a node outside [0, " << n << ")";
            throw Error(ErrorCode::DanglingEdge, msg.str());
        }
        if (e.first == e.second) throw_cycle(dag, {e.first, e.first});
        if (!seen.insert(e).second)
            throw Error(ErrorCode::DuplicateEdge, "duplicate edge " + dag.name(e.first) + " -> " + dag.name(e.second));
    }
    if (auto cycle = find_cycle(n, dag.edges()); !cycle.empty()) throw_cycle(dag, cycle);
    validate_prior(dag);
}

std::vector<std::size_t> topological_order(const Dag& dag) {
    const std::size_t n = dag.num_nodes();
    std::vector<std::size_t> indegree(n, 0);
    for (const auto& [u, v] : dag.edges()) {
        if (u >= n || v >= n) validate(dag);
        ++indegree[v];
    }
    const auto adj = adjacency(n, dag.edges());
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    for (std::size_t i = 0; i < n; ++i)
        if (indegree[i] == 0) ready.push(i);
    std::vector<std::size_t> order;
    order.reserve(n);
    while (!ready.empty()) {
        const std::size_t u = ready.top();
        ready.pop();
        order.push_back(u);
        for (std::size_t v : adj[u])
            if (--indegree[v] == 0) ready.push(v);
    }
    if (order.size() != n) throw_cycle(dag, find_cycle(n, dag.edges()));
    return order;
}

Dag prune_target_outgoing(const Dag& dag, std::size_t target) {
    if (target >= dag.num_nodes())
        throw Error(ErrorCode::InvalidNode, "target index " + std::to_string(target) + " out of range");
    std::vector<Edge> kept;
    for (const auto& e : dag.edges())
        if (e.first != target) kept.push_back(e);
    return dag.with_edges(std::move(kept));
}

std::size_t hamming_distance(const Dag& a, const Dag& b) {
    if (a.num_nodes() != b.num_nodes())
        throw Error(ErrorCode::NodeSetMismatch, "graphs have different node counts");
    std::vector<std::size_t> to_b(a.num_nodes());
    for (std::size_t i = 0; i < a.num_nodes(); ++i) {
        auto j = b.index_of(a.name(i));
        if (!j) throw Error(ErrorCode::NodeSetMismatch, "node '" + a.name(i) + "' missing from second graph");
        to_b[i] = *j;
    }
    std::set<Edge> ea;
    for (const auto& [u, v] : a.edges()) ea.insert({to_b[u], to_b[v]});
    const std::set<Edge> eb = b.edge_set();
    std::size_t diff = 0;
    for (const auto& e : ea) diff += eb.count(e) ? 0 : 1;
    for (const auto& e : eb) diff += ea.count(e) ? 0 : 1;
    return diff;
}

Dag random_subgraph(const Dag& dag, double keep_fraction, std::uint64_t seed) {
    if (!(keep_fraction >= 0.0 && keep_fraction <= 1.0))
        throw Error(ErrorCode::InvalidConfig, "keep_fraction must lie in [0, 1]");
    const std::size_t total = dag.num_edges();
    const auto keep = static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(total) - 1e-9));
    std::vector<std::size_t> idx(total);
    for (std::size_t i = 0; i < total; ++i) idx[i] = i;
    Rng rng(seed);
    // partial Fisher-Yates: the first `keep` slots are a uniform subset
    for (std::size_t i = 0; i < keep; ++i) std::swap(idx[i], idx[i + rng.below(total - i)]);
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());
    std::vector<Edge> kept;
    kept.reserve(keep);
    for (std::size_t i : idx) kept.push_back(dag.edges()[i]);
    return dag.with_edges(std::move(kept));
}

Dag make_imposter(const Dag& dag, std::size_t target, int n_mutations, std::uint64_t seed) {
    if (target >= dag.num_nodes())
        throw Error(ErrorCode::InvalidNode, "target index " + std::to_string(target) + " out of range");
    if (n_mutations < 1) throw Error(ErrorCode::InvalidConfig, "n_mutations must be >= 1");

    struct Mutation {
        bool reverse;
        Edge edge;  // edge to reverse, or edge to add
    };
    auto pair_key = [](std::size_t a, std::size_t b) { return Edge{std::min(a, b), std::max(a, b)}; };

    Rng rng(seed);
    std::vector<Edge> edges = dag.edges();
    std::set<Edge> touched;
    const std::size_t n = dag.num_nodes();

    for (int m = 0; m < n_mutations; ++m) {
        std::vector<Mutation> pool;
        std::set<Edge> adjacent;
        for (const auto& e : edges) adjacent.insert(pair_key(e.first, e.second));
        for (const auto& e : edges)
            if ((e.first == target || e.second == target) && !touched.count(pair_key(e.first, e.second)))
                pool.push_back({true, e});
        for (std::size_t u = 0; u < n; ++u)
            if (u != target && !adjacent.count(pair_key(u, target)) && !touched.count(pair_key(u, target)))
                pool.push_back({false, {u, target}});

        bool accepted = false;
        for (int attempt = 0; attempt < kImposterMaxAttempts && !pool.empty(); ++attempt) {
            const std::size_t pick = rng.below(pool.size());
            const Mutation mut = pool[pick];
            std::vector<Edge> trial = edges;
            if (mut.reverse) {
                auto it = std::find(trial.begin(), trial.end(), mut.edge);
                *it = {mut.edge.second, mut.edge.first};
            } else {
                trial.push_back(mut.edge);
            }
            if (is_acyclic(n, trial)) {
                edges = std::move(trial);
                touched.insert(pair_key(mut.edge.first, mut.edge.second));
                accepted = true;
                break;
            }
            pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
        }
        if (!accepted)
            throw Error(ErrorCode::NoFeasibleMutation,
                        "no acyclic mutation around '" + dag.name(target) + "' (mutation " + std::to_string(m + 1) + ")");
    }
    return dag.with_edges(std::move(edges));
}

std::set<std::tuple<std::size_t, std::size_t, std::size_t>> v_structures(const Dag& dag) {
    std::set<Edge> adjacent;
    for (const auto& [u, v] : dag.edges()) adjacent.insert({std::min(u, v), std::max(u, v)});
    std::set<std::tuple<std::size_t, std::size_t, std::size_t>> out;
    for (std::size_t c = 0; c < dag.num_nodes(); ++c) {
        const auto pa = dag.parents(c);
        for (std::size_t i = 0; i < pa.size(); ++i)
            for (std::size_t j = i + 1; j < pa.size(); ++j)
                if (!adjacent.count({pa[i], pa[j]})) out.insert({pa[i], c, pa[j]});
    }
    return out;
}

std::size_t mec_size(const Dag& dag) {
    validate(dag);
    const std::size_t n = dag.num_nodes();
    std::set<Edge> skeleton;
    for (const auto& [u, v] : dag.edges()) skeleton.insert({std::min(u, v), std::max(u, v)});
    if (n > kMecMaxNodes || skeleton.size() > kMecMaxEdges)
        throw Error(ErrorCode::TooLarge, "MEC enumeration limited to " + std::to_string(kMecMaxNodes) + " nodes and " +
                                             std::to_string(kMecMaxEdges) + " edges; supply gamma manually");

    const std::vector<Edge> pairs(skeleton.begin(), skeleton.end());
    const auto reference = v_structures(dag);
    std::size_t count = 0;
    const std::size_t combos = std::size_t{1} << pairs.size();
    std::vector<Edge> oriented(pairs.size());
    for (std::size_t mask = 0; mask < combos; ++mask) {
        for (std::size_t i = 0; i < pairs.size(); ++i)
            oriented[i] = (mask >> i) & 1U ? Edge{pairs[i].second, pairs[i].first} : pairs[i];
        if (!is_acyclic(n, oriented)) continue;
        if (v_structures(dag.with_edges(oriented)) == reference) ++count;
    }
    return count;
}

// JSON ---------------------------------------------------------------------

namespace {

nlohmann::json kind_to_json(VariableKind k) {
    if (k.is_continuous()) return "continuous";
    return nlohmann::json{{"discrete", k.cardinality}};
}

VariableKind kind_from_json(const nlohmann::json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "continuous") return VariableKind::continuous();
    } else if (j.is_object() && j.contains("discrete")) {
        const int card = j.at("discrete").get<int>();
        if (card < 1) throw Error(ErrorCode::ParseError, "discrete cardinality must be >= 1");
        return VariableKind::discrete(card);
    }
    throw Error(ErrorCode::ParseError, "node kind must be \"continuous\" or {\"discrete\": k}");
}

nlohmann::json edges_to_json(const Dag& dag, const auto& edges) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [u, v] : edges) out.push_back({dag.name(u), dag.name(v)});
    return out;
}

Edge edge_from_json(const Dag& dag, const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::ParseError, "edge must be [parent, child]");
    const auto p = dag.index_of(j[0].get<std::string>());
    const auto c = dag.index_of(j[1].get<std::string>());
    if (!p || !c) throw Error(ErrorCode::DanglingEdge, "edge " + j.dump() + " references an unknown node");
    return {*p, *c};
}

}  // namespace

nlohmann::json to_json(const Dag& dag) {
    nlohmann::json nodes = nlohmann::json::array();
    for (std::size_t i = 0; i < dag.num_nodes(); ++i)
        nodes.push_back({{"name", dag.name(i)}, {"kind", kind_to_json(dag.kind(i))}});
    nlohmann::json doc{{"nodes", nodes}, {"edges", edges_to_json(dag, dag.edges())}};
    const auto& pk = dag.prior();
    if (!pk.empty()) {
        nlohmann::json tiers = nlohmann::json::array();
        for (const auto& tier : pk.tiers) {
            nlohmann::json names = nlohmann::json::array();
            for (std::size_t node : tier) names.push_back(dag.name(node));
            tiers.push_back(names);
        }
        doc["prior_knowledge"] = {{"required", edges_to_json(dag, pk.required)},
                                  {"forbidden", edges_to_json(dag, pk.forbidden)},
                                  {"tiers", tiers}};
    }
    return doc;
}

Dag dag_from_json(const nlohmann::json& doc) {
    try {
        std::vector<std::string> names;
        std::vector<VariableKind> kinds;
        for (const auto& node : doc.at("nodes")) {
            names.push_back(node.at("name").get<std::string>());
            kinds.push_back(node.contains("kind") ? kind_from_json(node.at("kind")) : VariableKind::continuous());
        }
        Dag dag(names, kinds);
        std::vector<Edge> edges;
        for (const auto& e : doc.value("edges", nlohmann::json::array())) edges.push_back(edge_from_json(dag, e));
        dag = dag.with_edges(std::move(edges));
        if (doc.contains("prior_knowledge")) {
            const auto& pkj = doc.at("prior_knowledge");
            PriorKnowledge pk;
            for (const auto& e : pkj.value("required", nlohmann::json::array())) pk.required.insert(edge_from_json(dag, e));
            for (const auto& e : pkj.value("forbidden", nlohmann::json::array()))
                pk.forbidden.insert(edge_from_json(dag, e));
            for (const auto& tier : pkj.value("tiers", nlohmann::json::array())) {
                std::vector<std::size_t> members;
                for (const auto& name : tier) members.push_back(dag.require_index(name.get<std::string>()));
                pk.tiers.push_back(std::move(members));
            }
            dag.set_prior(std::move(pk));
        }
        return dag;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("malformed DAG document: ") + e.what());
    }
}

Dag load_dag(const std::filesystem::path& path) {
    Dag dag = dag_from_json(io::read_json(path));
    validate(dag);
    return dag;
}

void save_dag(const Dag& dag, const std::filesystem::path& path) { io::write_json(path, to_json(dag)); }

}  // namespace causal_gate::graph
