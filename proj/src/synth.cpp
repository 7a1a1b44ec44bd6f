#include "causal_gate/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "causal_gate/error.hpp"
#include "causal_gate/rng.hpp"

namespace causal_gate::synth {

graph::Dag random_dag(std::size_t n, std::uint64_t seed) {
    if (n < 3) throw Error(ErrorCode::InvalidN, "random_dag needs n >= 3, got " + std::to_string(n));
    Rng rng(seed);
    const std::size_t max_edges = n * (n - 1) / 2;
    const auto e = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(n), static_cast<std::int64_t>(max_edges)));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));

    std::vector<graph::Edge> forward;
    forward.reserve(max_edges);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) forward.push_back({order[i], order[j]});
    for (std::size_t i = 0; i < e; ++i) std::swap(forward[i], forward[i + rng.below(forward.size() - i)]);
    forward.resize(e);
    std::sort(forward.begin(), forward.end());

    std::vector<std::string> names(n);
    for (std::size_t i = 0; i < n; ++i) names[i] = "x" + std::to_string(i);
    return graph::Dag(std::move(names), {}, std::move(forward));
}

Scm build_scm(const graph::Dag& dag, std::uint64_t seed, KindPolicy policy) {
    graph::validate(dag);
    Rng rng(seed);
    const std::size_t n = dag.num_nodes();
    Scm scm;
    scm.dag = dag;

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(perm));
    scm.enumeration.resize(n);
    for (std::size_t pos = 0; pos < n; ++pos) scm.enumeration[perm[pos]] = pos + 1;

    scm.kinds.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
        if (dag.parents(v).empty()) {
            scm.kinds[v] = FunctionKind::noise;
            continue;
        }
        switch (policy) {
            case KindPolicy::random:
                scm.kinds[v] = rng.below(2) == 0 ? FunctionKind::linear : FunctionKind::exponential;
                break;
            case KindPolicy::all_linear: scm.kinds[v] = FunctionKind::linear; break;
            case KindPolicy::all_exponential: scm.kinds[v] = FunctionKind::exponential; break;
        }
    }
    scm.noise.assign(n, Gaussian{});
    return scm;
}

data::Table sample(const Scm& scm, std::size_t n_rows, std::uint64_t seed,
                   const std::optional<Perturbation>& perturbation) {
    if (n_rows == 0) throw Error(ErrorCode::TooFewRows, "sample needs n_rows >= 1");
    const auto& dag = scm.dag;
    const std::size_t n = dag.num_nodes();
    std::vector<Gaussian> laws = scm.noise;
    if (perturbation) {
        if (perturbation->nodes.empty()) throw Error(ErrorCode::InvalidConfig, "perturbation needs at least one node");
        if (!(perturbation->noise.variance > 0.0))
            throw Error(ErrorCode::InvalidConfig, "perturbation variance must be positive");
        for (std::size_t v : perturbation->nodes) {
            if (v >= n) throw Error(ErrorCode::InvalidNode, "perturbed node out of range");
            laws[v] = perturbation->noise;
        }
    }

    Rng rng(seed);
    std::vector<std::vector<double>> cols(n, std::vector<double>(n_rows));
    for (std::size_t v : graph::topological_order(dag)) {
        const auto parents = dag.parents(v);
        auto& col = cols[v];
        for (std::size_t r = 0; r < n_rows; ++r) col[r] = rng.normal(laws[v].mean, laws[v].variance);
        for (std::size_t p : parents) {
            const double s = scm.sign_of(p);
            const auto& pc = cols[p];
            if (scm.kinds[v] == FunctionKind::exponential) {
                for (std::size_t r = 0; r < n_rows; ++r) col[r] += s * std::exp(std::clamp(pc[r], -kExpClip, kExpClip));
            } else {
                for (std::size_t r = 0; r < n_rows; ++r) col[r] += s * pc[r];
            }
        }
        for (double x : col)
            if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, "non-finite value sampled at node '" + dag.name(v) + "'");
    }

    data::Schema schema;
    for (std::size_t v = 0; v < n; ++v) schema.push_back({dag.name(v), VariableKind::continuous(), {}});
    return data::Table(std::move(schema), std::move(cols));
}

data::Table sample(const Scm& scm, std::size_t n_rows, const Gaussian& base_noise,
                   const std::optional<Perturbation>& perturbation, std::uint64_t seed) {
    Scm with_base = scm;
    with_base.noise.assign(scm.dag.num_nodes(), base_noise);
    return sample(with_base, n_rows, seed, perturbation);
}

std::vector<data::Table> motivating_suite(const Scm& scm, std::uint64_t seed, std::size_t rows) {
    Perturbation all;
    all.nodes.resize(scm.dag.num_nodes());
    std::iota(all.nodes.begin(), all.nodes.end(), std::size_t{0});
    std::vector<data::Table> suite;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            all.noise = {kSuiteMeans[i], kSuiteVariances[j]};
            suite.push_back(sample(scm, rows, derive_seed(seed, {i, j}), all));
        }
    }
    return suite;
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

data::Table bernoulli_target(const data::Table& table, std::string_view target, std::uint64_t seed) {
    const std::size_t col = table.require_index(target);
    if (!table.spec(col).kind.is_continuous())
        throw Error(ErrorCode::NotContinuous, "bernoulli target '" + std::string(target) + "' must be continuous");
    Rng rng(seed);
    std::vector<double> labels(table.num_rows());
    const auto& x = table.column(col);
    for (std::size_t r = 0; r < labels.size(); ++r) labels[r] = rng.bernoulli(sigmoid(x[r])) ? 1.0 : 0.0;
    data::ColumnSpec spec{std::string(target), VariableKind::discrete(2), {"0", "1"}};
    return table.with_column(col, std::move(spec), std::move(labels));
}

namespace {

std::string_view kind_name(FunctionKind k) {
    switch (k) {
        case FunctionKind::noise: return "noise";
        case FunctionKind::linear: return "linear";
        case FunctionKind::exponential: return "exponential";
    }
    return "noise";
}

FunctionKind kind_from_name(const std::string& s) {
    if (s == "noise") return FunctionKind::noise;
    if (s == "linear") return FunctionKind::linear;
    if (s == "exponential") return FunctionKind::exponential;
    throw Error(ErrorCode::ParseError, "unknown function kind '" + s + "'");
}

}  // namespace

nlohmann::json to_json(const Scm& scm) {
    nlohmann::json nodes = nlohmann::json::array();
    for (std::size_t v = 0; v < scm.dag.num_nodes(); ++v) {
        nlohmann::json signs = nlohmann::json::object();
        for (std::size_t p : scm.dag.parents(v)) signs[scm.dag.name(p)] = scm.sign_of(p);
        nodes.push_back({{"name", scm.dag.name(v)},
                         {"enumeration", scm.enumeration[v]},
                         {"function", std::string(kind_name(scm.kinds[v]))},
                         {"parent_signs", signs},
                         {"noise", {{"mean", scm.noise[v].mean}, {"variance", scm.noise[v].variance}}}});
    }
    return {{"dag", graph::to_json(scm.dag)}, {"nodes", nodes}, {"exp_clip", kExpClip}};
}

Scm scm_from_json(const nlohmann::json& doc) {
    try {
        Scm scm;
        scm.dag = graph::dag_from_json(doc.at("dag"));
        graph::validate(scm.dag);
        const std::size_t n = scm.dag.num_nodes();
        scm.enumeration.resize(n);
        scm.kinds.resize(n);
        scm.noise.resize(n);
        const auto& nodes = doc.at("nodes");
        if (nodes.size() != n) throw Error(ErrorCode::ParseError, "SCM node list does not match its DAG");
        for (const auto& node : nodes) {
            const std::size_t v = scm.dag.require_index(node.at("name").get<std::string>());
            scm.enumeration[v] = node.at("enumeration").get<std::size_t>();
            scm.kinds[v] = kind_from_name(node.at("function").get<std::string>());
            scm.noise[v] = {node.at("noise").at("mean").get<double>(), node.at("noise").at("variance").get<double>()};
        }
        return scm;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("malformed SCM document: ") + e.what());
    }
}

}  // namespace causal_gate::synth
