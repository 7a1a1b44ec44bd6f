#include "causal_gate/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "causal_gate/error.hpp"
#include "causal_gate/io.hpp"
#include "causal_gate/mlp.hpp"
#include "causal_gate/parallel.hpp"
#include "causal_gate/rng.hpp"
#include "causal_gate/synth.hpp"

namespace causal_gate::experiments {

namespace {

constexpr std::pair<Preset, std::string_view> kPresetNames[] = {
    {Preset::motivating, "motivating"}, {Preset::robustness, "robustness"},         {Preset::subgraph, "subgraph"},
    {Preset::imposter, "imposter"},     {Preset::classification, "classification"}, {Preset::ood_csv, "ood_csv"},
};

// sub-seed tags, one per random decision of a run
enum Tag : std::uint64_t {
    kDagTag = 1,
    kScmTag,
    kTargetTag,
    kTrainDataTag,
    kSplitTag,
    kTestDataTag,
    kPerturbTag,
    kModelTag,
    kLabelTrainTag,
    kLabelTestTag,
    kSubgraphTag,
    kImposterTag,
    kSuiteTag,
    kCamLabelTag,
    kFoldTag,
    kHoldoutTag,
};

}  // namespace

std::string_view to_string(Preset preset) {
    for (const auto& [p, name] : kPresetNames)
        if (p == preset) return name;
    return "robustness";
}

Preset preset_from_string(std::string_view s) {
    for (const auto& [p, name] : kPresetNames)
        if (name == s) return p;
    throw Error(ErrorCode::InvalidConfig, "unknown preset '" + std::string(s) + "'");
}

void ExperimentSpec::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
    if (n_dags < 1) fail("n_dags must be >= 1");
    if (n_models < 2) fail("n_models must be >= 2 to rank a population");
    if (preset != Preset::motivating && preset != Preset::ood_csv) {
        if (n_vertices.empty()) fail("n_vertices is empty");
        for (auto n : n_vertices)
            if (n < 3) fail("every vertex count must be >= 3");
    }
    if (lambda && !(*lambda >= 0.0 && std::isfinite(*lambda))) fail("lambda must be a finite value >= 0");
    if (gamma < 1) fail("gamma must be >= 1");
    if (k_folds < 1) fail("k_folds must be >= 1");
    if (!(top_fraction > 0.0 && top_fraction <= 1.0)) fail("top_fraction must be in (0, 1]");
    if (rows < 10) fail("rows must be >= 10");
    if (test_rows < 2) fail("test_rows must be >= 2");
    if (epochs < 1 || patience < 1 || batch_size < 1) fail("epochs, patience and batch_size must be >= 1");
    if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must be in [0, 1)");
    if (perturb_count < 1) fail("perturb_count must be >= 1");
    if (!(perturb_variance > 0.0)) fail("perturb_variance must be > 0");
    for (double k : keep_fractions)
        if (!(k >= 0.0 && k <= 1.0)) fail("keep fractions must lie in [0, 1]");
    for (int m : mutation_counts)
        if (m < 0) fail("mutation counts must be >= 0");
    if (preset == Preset::ood_csv) {
        if (csv.empty() || schema.empty() || dag.empty() || target.empty())
            fail("ood_csv needs csv, schema, dag and target");
        if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) fail("holdout_fraction must be in (0, 1)");
    }
}

double ExperimentSpec::resolved_lambda() const {
    if (lambda) return *lambda;
    return preset == Preset::ood_csv ? 1.25 : 1.0;
}

nlohmann::json to_json(const ExperimentSpec& s) {
    nlohmann::json j;
    j["preset"] = std::string(to_string(s.preset));
    j["n_vertices"] = s.n_vertices;
    j["n_dags"] = s.n_dags;
    j["n_models"] = s.n_models;
    j["seed"] = s.seed;
    j["lambda"] = s.resolved_lambda();
    j["gamma"] = s.gamma;
    j["k_folds"] = s.k_folds;
    j["top_fraction"] = s.top_fraction;
    j["rows"] = s.rows;
    j["test_rows"] = s.test_rows;
    j["epochs"] = s.epochs;
    j["patience"] = s.patience;
    j["batch_size"] = s.batch_size;
    j["learning_rate"] = s.learning_rate;
    j["momentum"] = s.momentum;
    j["perturb_count"] = s.perturb_count;
    j["perturb_mean"] = s.perturb_mean;
    j["perturb_variance"] = s.perturb_variance;
    j["keep_fractions"] = s.keep_fractions;
    j["mutation_counts"] = s.mutation_counts;
    j["feature_mask"] = s.feature_mask ? nlohmann::json(*s.feature_mask) : nlohmann::json(nullptr);
    j["csv"] = s.csv;
    j["schema"] = s.schema;
    j["dag"] = s.dag;
    j["target"] = s.target;
    j["holdout_column"] = s.holdout_column ? nlohmann::json(*s.holdout_column) : nlohmann::json(nullptr);
    j["holdout_side"] = s.holdout_side ? nlohmann::json(*s.holdout_side == data::Side::low ? "low" : "high")
                                       : nlohmann::json(nullptr);
    j["holdout_fraction"] = s.holdout_fraction;
    j["drop_missing"] = s.drop_missing;
    j["workers"] = s.workers;
    j["svg"] = s.svg;
    return j;
}

ExperimentSpec spec_from_json(const nlohmann::json& doc) {
    static const std::set<std::string> known = {
        "preset",       "n_vertices",     "n_dags",         "n_models",      "seed",          "lambda",
        "gamma",        "k_folds",        "top_fraction",   "rows",          "test_rows",     "epochs",
        "patience",     "batch_size",     "learning_rate",  "momentum",      "perturb_count", "perturb_mean",
        "perturb_variance", "keep_fractions", "mutation_counts", "feature_mask", "csv",       "schema",
        "dag",          "target",         "holdout_column", "holdout_side",  "holdout_fraction", "workers",
        "svg",          "drop_missing"};
    if (!doc.is_object()) throw Error(ErrorCode::ParseError, "experiment spec must be a JSON object");
    for (const auto& [key, value] : doc.items())
        if (!known.count(key)) throw Error(ErrorCode::InvalidConfig, "unknown spec key '" + key + "'");
    try {
        ExperimentSpec s;
        auto get = [&](const char* key, auto& field) {
            if (doc.contains(key) && !doc[key].is_null()) field = doc[key].get<std::decay_t<decltype(field)>>();
        };
        if (doc.contains("preset")) s.preset = preset_from_string(doc["preset"].get<std::string>());
        get("n_vertices", s.n_vertices);
        get("n_dags", s.n_dags);
        get("n_models", s.n_models);
        get("seed", s.seed);
        if (doc.contains("lambda") && !doc["lambda"].is_null()) s.lambda = doc["lambda"].get<double>();
        get("gamma", s.gamma);
        get("k_folds", s.k_folds);
        get("top_fraction", s.top_fraction);
        get("rows", s.rows);
        get("test_rows", s.test_rows);
        get("epochs", s.epochs);
        get("patience", s.patience);
        get("batch_size", s.batch_size);
        get("learning_rate", s.learning_rate);
        get("momentum", s.momentum);
        get("perturb_count", s.perturb_count);
        get("perturb_mean", s.perturb_mean);
        get("perturb_variance", s.perturb_variance);
        get("keep_fractions", s.keep_fractions);
        get("mutation_counts", s.mutation_counts);
        if (doc.contains("feature_mask") && !doc["feature_mask"].is_null())
            s.feature_mask = doc["feature_mask"].get<std::vector<std::string>>();
        get("csv", s.csv);
        get("schema", s.schema);
        get("dag", s.dag);
        get("target", s.target);
        if (doc.contains("holdout_column") && !doc["holdout_column"].is_null())
            s.holdout_column = doc["holdout_column"].get<std::string>();
        if (doc.contains("holdout_side") && !doc["holdout_side"].is_null()) {
            const auto side = doc["holdout_side"].get<std::string>();
            if (side != "low" && side != "high") throw Error(ErrorCode::InvalidConfig, "holdout_side must be low or high");
            s.holdout_side = side == "low" ? data::Side::low : data::Side::high;
        }
        get("holdout_fraction", s.holdout_fraction);
        get("drop_missing", s.drop_missing);
        get("workers", s.workers);
        get("svg", s.svg);
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("malformed experiment spec: ") + e.what());
    }
}

namespace {

/// Trained population plus everything needed to score it.
struct Prepared {
    graph::Dag dag;
    std::string target;
    std::vector<std::string> perturbed;
    data::Table sel;
    std::vector<ModelPredictions> sel_preds;
    std::vector<double> test_metric;
    cam::HMetric metric = cam::HMetric::mse;
};

mlp::TrainConfig train_config(const ExperimentSpec& spec, bool binary) {
    mlp::TrainConfig c;
    c.learning_rate = spec.learning_rate;
    c.momentum = spec.momentum;
    c.max_epochs = spec.epochs;
    c.batch_size = spec.batch_size;
    c.patience = spec.patience;
    c.loss = binary ? mlp::Loss::cross_entropy : mlp::Loss::squared_error;
    return c;
}

std::optional<std::vector<std::string>> masked_features(const ExperimentSpec& spec, const data::Table& table,
                                                        const std::string& target) {
    if (!spec.feature_mask) return std::nullopt;
    std::vector<std::string> out;
    for (const auto& name : mlp::default_features(table, target))
        if (std::find(spec.feature_mask->begin(), spec.feature_mask->end(), name) != spec.feature_mask->end())
            out.push_back(name);
    if (out.empty()) throw Error(ErrorCode::InvalidConfig, "feature mask leaves no input columns");
    return out;
}

/// Trains the population on D1's splits and evaluates it on the test tables.
void train_and_test(const ExperimentSpec& spec, std::uint64_t seed, const data::Table& d1,
                    const std::vector<data::Table>& tests, Prepared& p, std::size_t workers) {
    const bool binary = p.metric == cam::HMetric::auroc;
    data::SplitSpec split_spec;
    split_spec.seed = derive_seed(seed, {kSplitTag});
    const auto parts = data::split(d1, split_spec);
    const auto scaler = data::fit_scaler(parts.train);
    const auto train = data::apply_scaler(scaler, parts.train);
    const auto val = data::apply_scaler(scaler, parts.val);
    p.sel = data::apply_scaler(scaler, parts.sel);

    const auto models = mlp::train_population(spec.n_models, train, val, p.target, train_config(spec, binary),
                                              derive_seed(seed, {kModelTag}), workers,
                                              masked_features(spec, train, p.target));
    p.sel_preds = mlp::predict_population(models, p.sel);

    p.test_metric.assign(models.size(), 0.0);
    for (const auto& raw : tests) {
        const auto test = data::apply_scaler(scaler, raw);
        const auto& truth = test.column(p.target);
        for (std::size_t m = 0; m < models.size(); ++m) {
            const auto pred = mlp::predict(models[m].result.model, test);
            p.test_metric[m] += binary ? eval::auroc(truth, pred) : eval::mse(truth, pred);
        }
    }
    for (double& v : p.test_metric) v /= static_cast<double>(tests.size());
}

Prepared prepare_synthetic(const ExperimentSpec& spec, std::size_t n, std::uint64_t seed, std::size_t workers) {
    Prepared p;
    p.metric = spec.preset == Preset::classification ? cam::HMetric::auroc : cam::HMetric::mse;
    p.dag = synth::random_dag(n, derive_seed(seed, {kDagTag}));
    const auto scm = synth::build_scm(p.dag, derive_seed(seed, {kScmTag}));

    std::vector<std::size_t> candidates;
    for (std::size_t v = 0; v < n; ++v)
        if (p.dag.degree(v) > 0) candidates.push_back(v);
    Rng pick(derive_seed(seed, {kTargetTag}));
    p.target = p.dag.name(candidates[pick.below(candidates.size())]);

    data::Table d1 = synth::sample(scm, spec.rows, derive_seed(seed, {kTrainDataTag}));

    std::vector<std::size_t> nodes(n);
    std::iota(nodes.begin(), nodes.end(), std::size_t{0});
    Rng perturb_pick(derive_seed(seed, {kPerturbTag}));
    perturb_pick.shuffle(std::span<std::size_t>(nodes));
    synth::Perturbation perturbation;
    perturbation.nodes.assign(nodes.begin(), nodes.begin() + static_cast<std::ptrdiff_t>(std::min(spec.perturb_count, n)));
    std::sort(perturbation.nodes.begin(), perturbation.nodes.end());
    perturbation.noise = {spec.perturb_mean, spec.perturb_variance};
    for (std::size_t v : perturbation.nodes) p.perturbed.push_back(p.dag.name(v));
    data::Table d2 = synth::sample(scm, spec.test_rows, derive_seed(seed, {kTestDataTag}), perturbation);

    if (p.metric == cam::HMetric::auroc) {
        d1 = synth::bernoulli_target(d1, p.target, derive_seed(seed, {kLabelTrainTag}));
        d2 = synth::bernoulli_target(d2, p.target, derive_seed(seed, {kLabelTestTag}));
    }
    train_and_test(spec, seed, d1, {d2}, p, workers);
    return p;
}

Prepared prepare_motivating(const ExperimentSpec& spec, std::uint64_t seed, std::size_t workers) {
    Prepared p;
    p.dag = graph::Dag({"x0", "x1", "y"}, {}, {{0, 2}, {1, 2}});
    p.target = "y";
    const auto scm = synth::build_scm(p.dag, derive_seed(seed, {kScmTag}));
    const auto d1 = synth::sample(scm, spec.rows, derive_seed(seed, {kTrainDataTag}));
    const auto suite = synth::motivating_suite(scm, derive_seed(seed, {kSuiteTag}), spec.test_rows);
    p.perturbed = {"x0", "x1", "y"};
    train_and_test(spec, seed, d1, suite, p, workers);
    return p;
}

cam::CamConfig cam_config(const ExperimentSpec& spec, cam::HMetric metric, std::uint64_t seed) {
    auto c = cam::CamConfig::for_metric(metric);
    c.fixed_lambda = spec.resolved_lambda();
    c.gamma = spec.gamma;
    if (spec.k_folds > 1) c.k_folds = spec.k_folds;
    c.fold_seed = derive_seed(seed, {kFoldTag});
    c.label_seed = derive_seed(seed, {kCamLabelTag});
    return c;
}

std::vector<cam::ModelScore> score(const Prepared& p, const graph::Dag& dag, const cam::CamConfig& config,
                                   std::size_t workers) {
    return cam::select(p.sel_preds, p.sel, dag, p.target, config, workers).scores;
}

Run make_run(const ExperimentSpec& spec, const Prepared& p, std::size_t n, std::size_t index, std::uint64_t seed,
             const std::vector<cam::ModelScore>& scores) {
    Run r;
    r.n = n;
    r.index = index;
    r.seed = seed;
    r.target = p.target;
    r.dag = p.dag;
    r.perturbed = p.perturbed;
    r.report = eval::build_report(scores, p.test_metric, p.metric, spec.top_fraction);
    return r;
}

struct Job {
    std::size_t n;
    std::size_t index;
    std::uint64_t seed;
};

struct JobOutput {
    Run run;
    std::vector<VariantRow> variants;
};

JobOutput run_job(const ExperimentSpec& spec, const Job& job, std::size_t workers) {
    JobOutput out;
    Prepared p;
    switch (spec.preset) {
        case Preset::motivating: p = prepare_motivating(spec, job.seed, workers); break;
        default: p = prepare_synthetic(spec, job.n, job.seed, workers); break;
    }
    const auto config = cam_config(spec, p.metric, job.seed);
    const auto scores = score(p, p.dag, config, workers);
    out.run = make_run(spec, p, job.n, job.index, job.seed, scores);

    if (spec.preset == Preset::motivating) {
        std::vector<double> r, h;
        for (const auto& s : scores) {
            r.push_back(s.r);
            h.push_back(s.h);
        }
        out.run.spearman_cam = eval::spearman(r, p.test_metric);
        out.run.spearman_h = eval::spearman(h, p.test_metric);
    }

    const auto& truth = out.run.report.cam;
    const auto& by_h = out.run.report.stat;
    auto variant = [&](double level, const graph::Dag& g) {
        VariantRow v;
        v.n = job.n;
        v.index = job.index;
        v.level = level;
        v.edges = g.num_edges();
        v.hamming = graph::hamming_distance(p.dag, g);
        const auto s = eval::summarize(score(p, g, config, workers), cam::RankKey::r, p.test_metric, p.metric,
                                       spec.top_fraction);
        v.top_variant = s.top_mean;
        v.top_truth = truth.top_mean;
        v.delta = s.top_mean - truth.top_mean;
        v.ranking_equals_truth = s.ranking == truth.ranking;
        v.ranking_equals_h = s.ranking == by_h.ranking;
        return v;
    };

    if (spec.preset == Preset::subgraph) {
        for (std::size_t k = 0; k < spec.keep_fractions.size(); ++k) {
            const double keep = spec.keep_fractions[k];
            out.variants.push_back(
                variant(keep, graph::random_subgraph(p.dag, keep, derive_seed(job.seed, {kSubgraphTag, k}))));
        }
    } else if (spec.preset == Preset::imposter) {
        const std::size_t target = p.dag.require_index(p.target);
        for (std::size_t k = 0; k < spec.mutation_counts.size(); ++k) {
            const int m = spec.mutation_counts[k];
            if (m == 0) {
                out.variants.push_back(variant(0, p.dag));
                continue;
            }
            try {
                const auto imposter = graph::make_imposter(p.dag, target, m, derive_seed(job.seed, {kImposterTag, k}));
                out.variants.push_back(variant(m, imposter));
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NoFeasibleMutation) throw;
                VariantRow v;
                v.n = job.n;
                v.index = job.index;
                v.level = m;
                v.feasible = false;
                out.variants.push_back(v);
            }
        }
    }
    return out;
}

ExperimentResult run_ood(ExperimentSpec spec) {
    const auto schema = data::load_schema(spec.schema);
    data::CsvOptions csv_options;
    csv_options.drop_missing = spec.drop_missing;
    const auto table = data::load_csv(spec.csv, schema, csv_options);
    const auto dag = graph::load_dag(spec.dag);
    const std::size_t target_col = table.require_index(spec.target);
    dag.require_index(spec.target);
    const auto target_kind = table.spec(target_col).kind;
    if (target_kind.is_discrete() && target_kind.cardinality != 2)
        throw Error(ErrorCode::KindMismatch, "a discrete target must have exactly two categories");

    Rng pick(derive_seed(spec.seed, {kHoldoutTag}));
    if (!spec.holdout_column) {
        std::vector<std::string> continuous;
        for (const auto& c : table.schema())
            if (c.kind.is_continuous()) continuous.push_back(c.name);
        if (continuous.empty()) throw Error(ErrorCode::NotContinuous, "no continuous column to hold out on");
        spec.holdout_column = continuous[pick.below(continuous.size())];
    }
    if (!spec.holdout_side) spec.holdout_side = pick.below(2) == 0 ? data::Side::low : data::Side::high;
    spec.lambda = spec.resolved_lambda();

    const auto parts = data::ood_holdout(table, *spec.holdout_column, *spec.holdout_side, spec.holdout_fraction);
    ExperimentResult result;
    result.spec = spec;
    result.runs.resize(spec.n_dags);
    const std::size_t outer = std::min(spec.workers, spec.n_dags);
    const std::size_t inner = outer > 1 ? 1 : spec.workers;
    parallel_for(spec.n_dags, outer, [&](std::size_t d) {
        const std::uint64_t seed = derive_seed(spec.seed, {dag.num_nodes(), d});
        Prepared p;
        p.dag = dag;
        p.target = spec.target;
        p.metric = target_kind.is_discrete() ? cam::HMetric::auroc : cam::HMetric::mse;
        train_and_test(spec, seed, parts.remainder, {parts.held_out}, p, inner);
        const auto scores = score(p, dag, cam_config(spec, p.metric, seed), inner);
        result.runs[d] = make_run(spec, p, dag.num_nodes(), d, seed, scores);
    });
    return result;
}

}  // namespace

ExperimentResult run(const ExperimentSpec& input) {
    input.validate();
    if (input.preset == Preset::ood_csv) return run_ood(input);

    ExperimentResult result;
    result.spec = input;
    result.spec.lambda = input.resolved_lambda();
    const auto& spec = result.spec;

    std::vector<Job> jobs;
    const std::vector<std::size_t> sizes = spec.preset == Preset::motivating ? std::vector<std::size_t>{3} : spec.n_vertices;
    for (std::size_t n : sizes)
        for (std::size_t d = 0; d < spec.n_dags; ++d) jobs.push_back({n, d, derive_seed(spec.seed, {n, d})});

    std::vector<JobOutput> outputs(jobs.size());
    const std::size_t outer = std::min(spec.workers, jobs.size());
    const std::size_t inner = outer > 1 ? 1 : spec.workers;
    parallel_for(jobs.size(), outer, [&](std::size_t j) { outputs[j] = run_job(spec, jobs[j], inner); });

    for (auto& o : outputs) {
        result.runs.push_back(std::move(o.run));
        for (auto& v : o.variants) result.variants.push_back(v);
    }
    return result;
}

namespace {

double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

nlohmann::json summary_json(const ExperimentResult& result) {
    const bool auroc = !result.runs.empty() && result.runs.front().report.metric == cam::HMetric::auroc;
    std::map<std::size_t, std::vector<const Run*>> by_n;
    for (const auto& r : result.runs) by_n[r.n].push_back(&r);

    nlohmann::json per_n = nlohmann::json::array();
    for (const auto& [n, runs] : by_n) {
        std::vector<double> top_h, top_cam, ic_h, ic_cam, d_top, d_ic;
        std::size_t wins = 0, spearman_wins = 0;
        for (const Run* r : runs) {
            top_h.push_back(r->report.stat.top_mean);
            top_cam.push_back(r->report.cam.top_mean);
            ic_h.push_back(r->report.stat.ic);
            ic_cam.push_back(r->report.cam.ic);
            d_top.push_back(r->report.delta_top);
            d_ic.push_back(r->report.delta_ic);
            wins += r->report.delta_top >= 0.0 ? 1 : 0;
            if (r->spearman_cam && *r->spearman_cam > *r->spearman_h) ++spearman_wins;
        }
        nlohmann::json j{{"n", n}, {"runs", runs.size()}};
        const std::string top = auroc ? "auroc10" : "mse10";
        j[auroc ? "auroc10_h" : "mse10"] = mean(top_h);
        j[auroc ? "auroc10_cam" : "cam10"] = mean(top_cam);
        j[auroc ? "ic_h" : "ic_mse"] = mean(ic_h);
        j["ic_cam"] = mean(ic_cam);
        j[auroc ? "delta_auroc" : "delta_mse"] = mean(d_top);
        j["delta_ic"] = mean(d_ic);
        j["cam_wins"] = wins;
        j["cam_win_fraction"] = static_cast<double>(wins) / static_cast<double>(runs.size());
        if (result.spec.preset == Preset::motivating) {
            j["spearman_wins"] = spearman_wins;
            j["spearman_win_fraction"] = static_cast<double>(spearman_wins) / static_cast<double>(runs.size());
        }
        per_n.push_back(j);
    }

    nlohmann::json levels = nlohmann::json::array();
    if (!result.variants.empty()) {
        std::map<double, std::vector<const VariantRow*>> by_level;
        for (const auto& v : result.variants) by_level[v.level].push_back(&v);
        auto emit = [&](double level, const std::vector<const VariantRow*>& rows) {
            std::vector<double> delta, hamming, edges;
            std::size_t infeasible = 0;
            for (const auto* v : rows) {
                if (!v->feasible) {
                    ++infeasible;
                    continue;
                }
                delta.push_back(v->delta);
                hamming.push_back(static_cast<double>(v->hamming));
                edges.push_back(static_cast<double>(v->edges));
            }
            levels.push_back({{"level", level},
                              {"runs", delta.size()},
                              {"infeasible", infeasible},
                              {"mean_delta", mean(delta)},
                              {"mean_hamming", mean(hamming)},
                              {"mean_edges", mean(edges)}});
        };
        // keep fractions read best from full graph down; mutation counts upward
        if (result.spec.preset == Preset::subgraph) {
            for (auto it = by_level.rbegin(); it != by_level.rend(); ++it) emit(it->first, it->second);
        } else {
            for (const auto& [level, rows] : by_level) emit(level, rows);
        }
    }
    return {{"per_n", per_n}, {"levels", levels}};
}

nlohmann::json report_json(const ExperimentResult& result) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : result.runs) {
        nlohmann::json edges = nlohmann::json::array();
        for (const auto& [u, v] : r.dag.edges()) edges.push_back({r.dag.name(u), r.dag.name(v)});
        nlohmann::json j{{"n", r.n},           {"index", r.index},         {"seed", r.seed},
                         {"target", r.target}, {"edges", edges},           {"perturbed", r.perturbed},
                         {"report", eval::to_json(r.report)}};
        if (r.spearman_cam) {
            j["spearman_cam"] = *r.spearman_cam;
            j["spearman_h"] = *r.spearman_h;
        }
        runs.push_back(j);
    }
    nlohmann::json variants = nlohmann::json::array();
    for (const auto& v : result.variants) {
        variants.push_back({{"n", v.n},
                            {"index", v.index},
                            {"level", v.level},
                            {"feasible", v.feasible},
                            {"edges", v.edges},
                            {"hamming", v.hamming},
                            {"top_variant", v.top_variant},
                            {"top_truth", v.top_truth},
                            {"delta", v.delta},
                            {"ranking_equals_truth", v.ranking_equals_truth},
                            {"ranking_equals_h", v.ranking_equals_h}});
    }
    return {{"preset", std::string(to_string(result.spec.preset))},
            {"summary", summary_json(result)},
            {"runs", runs},
            {"variants", variants}};
}

std::string report_csv(const ExperimentResult& result) {
    std::string out = "n,index,target,model_id,f,h,r,test,rank_cam,rank_h\n";
    for (const auto& r : result.runs) {
        const std::string body = eval::to_csv(r.report);
        std::istringstream lines(body);
        std::string line;
        std::getline(lines, line);  // header
        while (std::getline(lines, line)) {
            out += std::to_string(r.n) + "," + std::to_string(r.index) + "," + r.target + "," + line + "\n";
        }
    }
    return out;
}

std::string scatter_csv(const ExperimentResult& result) {
    std::string out = "n,index,model_id,selection_metric,cam_score,test_metric\n";
    for (const auto& r : result.runs)
        for (const auto& m : r.report.models)
            out += std::to_string(r.n) + "," + std::to_string(r.index) + "," + m.model_id + "," +
                   data::format_double(m.h) + "," + data::format_double(m.r) + "," + data::format_double(m.test) + "\n";
    return out;
}

std::string scatter_svg(const ExperimentResult& result) {
    // two panels: selection metric vs test, CAM score vs test; x normalized per run
    constexpr double w = 360, h = 300, pad = 40;
    double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
    for (const auto& r : result.runs)
        for (const auto& m : r.report.models) {
            ymin = std::min(ymin, m.test);
            ymax = std::max(ymax, m.test);
        }
    if (!(ymax > ymin)) ymax = ymin + 1.0;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * w << "\" height=\"" << h << "\">\n";
    for (int panel = 0; panel < 2; ++panel) {
        const double x0 = panel * w;
        svg << "<rect x=\"" << x0 + pad << "\" y=\"" << pad / 2 << "\" width=\"" << w - 1.5 * pad << "\" height=\""
            << h - 1.5 * pad << "\" fill=\"none\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << x0 + w / 2 << "\" y=\"" << h - 5 << "\" text-anchor=\"middle\" font-size=\"12\">"
            << (panel == 0 ? "selection metric (normalized)" : "CAM score (normalized)") << "</text>\n";
        for (const auto& r : result.runs) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (const auto& m : r.report.models) {
                const double x = panel == 0 ? m.h : m.r;
                lo = std::min(lo, x);
                hi = std::max(hi, x);
            }
            for (const auto& m : r.report.models) {
                const double x = panel == 0 ? m.h : m.r;
                const double nx = hi > lo ? (x - lo) / (hi - lo) : 0.5;
                const double ny = (m.test - ymin) / (ymax - ymin);
                svg << "<circle cx=\"" << x0 + pad + nx * (w - 1.5 * pad) << "\" cy=\""
                    << pad / 2 + (1.0 - ny) * (h - 1.5 * pad) << "\" r=\"2\" fill=\"steelblue\"/>\n";
            }
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

void write_outputs(const ExperimentResult& result, const std::filesystem::path& out_dir) {
    io::write_json(out_dir / "config_echo.json", to_json(result.spec));
    io::write_json(out_dir / "report.json", report_json(result));
    io::write_file(out_dir / "report.csv", report_csv(result));
    io::write_file(out_dir / "scatter_sel_vs_test.csv", scatter_csv(result));
    if (result.spec.svg) io::write_file(out_dir / "scatter.svg", scatter_svg(result));
}

}  // namespace causal_gate::experiments
