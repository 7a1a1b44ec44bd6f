#include "causal_gate/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <optional>

#include <CLI11.hpp>

#include "causal_gate/cam.hpp"
#include "causal_gate/data.hpp"
#include "causal_gate/error.hpp"
#include "causal_gate/experiments.hpp"
#include "causal_gate/graph.hpp"
#include "causal_gate/io.hpp"
#include "causal_gate/mlp.hpp"
#include "causal_gate/parallel.hpp"
#include "causal_gate/rng.hpp"
#include "causal_gate/scoring.hpp"
#include "causal_gate/synth.hpp"

namespace causal_gate::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '\r', ' ');
    return s;
}

data::Table load_table(const std::string& csv, const data::Schema& schema, bool drop_missing, std::ostream& os) {
    data::CsvOptions opts;
    opts.drop_missing = drop_missing;
    data::CsvLoadReport report;
    auto table = data::load_csv(csv, schema, opts, &report);
    if (report.dropped_rows > 0) os << "dropped " << report.dropped_rows << " rows with missing values from " << csv << "\n";
    return table;
}

void write_echo(const fs::path& out, const std::string& command, json params) {
    params["command"] = command;
    io::write_json(out / "config_echo.json", params);
}

struct SynthArgs {
    std::size_t n = 4;
    std::size_t rows = 10000;
    std::size_t test_rows = 2000;
    std::size_t perturb_count = 1;
    double perturb_mean = 1.0;
    double perturb_variance = 2.0;
    std::string dag;
    std::string target;
    bool binary = false;
};

struct TrainArgs {
    std::string csv, schema, target, test_csv;
    std::size_t models = 10;
    std::size_t epochs = 20, patience = 3, batch = 32;
    double lr = 1e-4, momentum = 0.9;
    bool drop_missing = false;
};

struct SelectArgs {
    std::string dag, csv, schema, target, preds;
    std::optional<double> lambda, expected_yf, expected_yh;
    std::size_t gamma = 1;
    bool gamma_mec = false;
    std::size_t kfolds = 1;
    std::string metric;
    bool drop_missing = false;
};

struct ExperimentArgs {
    std::string preset;
    std::string config;
    std::vector<std::size_t> n;
    std::optional<std::size_t> dags, models, rows, test_rows, epochs, gamma, kfolds, perturb_count;
    std::optional<double> lambda;
    std::string csv, schema, dag, target, holdout_column, holdout_side;
    std::optional<double> holdout_fraction;
    bool svg = false;
    bool drop_missing = false;
};

void run_synth(const SynthArgs& a, std::uint64_t seed, const fs::path& out, std::ostream& os) {
    graph::Dag dag = a.dag.empty() ? synth::random_dag(a.n, derive_seed(seed, {1})) : graph::load_dag(a.dag);
    const auto scm = synth::build_scm(dag, derive_seed(seed, {2}));
    std::string target = a.target;
    if (target.empty()) {
        std::vector<std::size_t> candidates;
        for (std::size_t v = 0; v < dag.num_nodes(); ++v)
            if (dag.degree(v) > 0) candidates.push_back(v);
        if (candidates.empty()) throw Error(ErrorCode::InvalidConfig, "the DAG has no edges to pick a target from");
        Rng pick(derive_seed(seed, {3}));
        target = dag.name(candidates[pick.below(candidates.size())]);
    }
    const std::size_t target_idx = dag.require_index(target);
    (void)target_idx;

    std::vector<std::size_t> nodes(dag.num_nodes());
    std::iota(nodes.begin(), nodes.end(), std::size_t{0});
    Rng perturb_pick(derive_seed(seed, {7}));
    perturb_pick.shuffle(std::span<std::size_t>(nodes));
    synth::Perturbation perturbation;
    perturbation.nodes.assign(nodes.begin(),
                              nodes.begin() + static_cast<std::ptrdiff_t>(std::min(a.perturb_count, nodes.size())));
    std::sort(perturbation.nodes.begin(), perturbation.nodes.end());
    perturbation.noise = {a.perturb_mean, a.perturb_variance};

    auto train = synth::sample(scm, a.rows, derive_seed(seed, {4}));
    auto test = synth::sample(scm, a.test_rows, derive_seed(seed, {6}), perturbation);
    if (a.binary) {
        train = synth::bernoulli_target(train, target, derive_seed(seed, {9}));
        test = synth::bernoulli_target(test, target, derive_seed(seed, {10}));
    }

    graph::save_dag(dag, out / "dag.json");
    io::write_json(out / "scm.json", synth::to_json(scm));
    io::write_json(out / "schema.json", data::schema_to_json(train.schema()));
    data::save_csv(train, out / "train.csv");
    data::save_csv(test, out / "test.csv");

    std::vector<std::string> perturbed;
    for (std::size_t v : perturbation.nodes) perturbed.push_back(dag.name(v));
    write_echo(out, "synth gen",
               {{"n", dag.num_nodes()},
                {"rows", a.rows},
                {"test_rows", a.test_rows},
                {"perturbed", perturbed},
                {"perturb_mean", a.perturb_mean},
                {"perturb_variance", a.perturb_variance},
                {"dag", a.dag},
                {"target", target},
                {"binary", a.binary},
                {"seed", seed}});
    os << "target " << target << "\n";
}

void run_train(const TrainArgs& a, std::uint64_t seed, std::size_t workers, const fs::path& out, std::ostream& os) {
    const auto schema = data::load_schema(a.schema);
    const auto table = load_table(a.csv, schema, a.drop_missing, os);
    const auto kind = table.spec(table.require_index(a.target)).kind;
    const bool binary = kind.is_discrete();
    if (binary && kind.cardinality != 2) throw Error(ErrorCode::KindMismatch, "a discrete target must have two categories");

    data::SplitSpec split_spec;
    split_spec.seed = seed;
    const auto idx = data::split_indices(table.num_rows(), split_spec);
    const auto scaler = data::fit_scaler(table.select_rows(idx.train));
    const auto train = data::apply_scaler(scaler, table.select_rows(idx.train));
    const auto val = data::apply_scaler(scaler, table.select_rows(idx.val));
    const auto sel = data::apply_scaler(scaler, table.select_rows(idx.sel));

    mlp::TrainConfig cfg;
    cfg.learning_rate = a.lr;
    cfg.momentum = a.momentum;
    cfg.max_epochs = a.epochs;
    cfg.patience = a.patience;
    cfg.batch_size = a.batch;
    cfg.loss = binary ? mlp::Loss::cross_entropy : mlp::Loss::squared_error;
    const auto models = mlp::train_population(a.models, train, val, a.target, cfg, seed, workers);

    for (const auto& m : models) {
        json doc = mlp::to_json(m.result.model);
        doc["model_id"] = m.model_id;
        doc["best_epoch"] = m.result.best_epoch;
        json history = json::array();
        for (const auto& e : m.result.history)
            history.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
        doc["history"] = history;
        io::write_json(out / "models" / ("model_" + m.model_id + ".json"), doc);
    }
    io::write_json(out / "scaler.json", data::scaler_to_json(scaler));
    io::write_json(out / "split.json", data::split_to_json(idx, split_spec));
    data::save_csv(sel, out / "sel.csv");
    io::write_file(out / "preds_sel.csv", mlp::predictions_to_csv(mlp::predict_population(models, sel)));
    if (!a.test_csv.empty()) {
        const auto test = data::apply_scaler(scaler, load_table(a.test_csv, schema, a.drop_missing, os));
        data::save_csv(test, out / "test_scaled.csv");
        io::write_file(out / "preds_test.csv", mlp::predictions_to_csv(mlp::predict_population(models, test)));
    }
    write_echo(out, "train",
               {{"csv", a.csv},
                {"schema", a.schema},
                {"target", a.target},
                {"test_csv", a.test_csv},
                {"models", a.models},
                {"epochs", a.epochs},
                {"patience", a.patience},
                {"batch_size", a.batch},
                {"learning_rate", a.lr},
                {"momentum", a.momentum},
                {"loss", binary ? "cross_entropy" : "squared_error"},
                {"split", {{"train", 0.6}, {"val", 0.2}, {"sel", 0.2}}},
                {"seed", seed}});
    os << "trained " << models.size() << " models\n";
}

void run_score(const SelectArgs& a, std::uint64_t seed, const fs::path& out, std::ostream& os) {
    const auto dag = graph::load_dag(a.dag);
    const auto table = load_table(a.csv, data::load_schema(a.schema), a.drop_missing, os);
    json result;
    if (a.preds.empty()) {
        result = scoring::to_json(scoring::log_likelihood(dag, table));
    } else {
        if (a.target.empty()) throw Error(ErrorCode::InvalidConfig, "--preds needs --target");
        const auto preds = mlp::load_external_predictions(a.preds, table.num_rows());
        json models = json::array();
        for (const auto& m : preds) {
            const auto d_prime = data::substitute_predictions(table, a.target, m.values);
            models.push_back({{"model_id", m.model_id}, {"f", scoring::causal_assurance_term(dag, a.target, d_prime)}});
        }
        result = {{"target", a.target}, {"models", models}};
    }
    io::write_json(out / "score.json", result);
    write_echo(out, "score",
               {{"dag", a.dag}, {"csv", a.csv}, {"schema", a.schema}, {"target", a.target}, {"preds", a.preds}, {"seed", seed}});
    os << result.dump(2) << "\n";
}

void run_select(const SelectArgs& a, std::uint64_t seed, std::size_t workers, const fs::path& out, std::ostream& os) {
    const auto dag = graph::load_dag(a.dag);
    const auto table = load_table(a.csv, data::load_schema(a.schema), a.drop_missing, os);
    const auto preds = mlp::load_external_predictions(a.preds, table.num_rows());
    const bool discrete = table.spec(table.require_index(a.target)).kind.is_discrete();

    cam::HMetric metric = discrete ? cam::HMetric::auroc : cam::HMetric::mse;
    if (!a.metric.empty()) metric = cam::h_metric_from_string(a.metric);
    auto config = cam::CamConfig::for_metric(metric);
    config.gamma = a.gamma_mec ? graph::mec_size(dag) : a.gamma;
    config.expected_yf = a.expected_yf;
    config.expected_yh = a.expected_yh;
    if (a.lambda) config.fixed_lambda = a.lambda;
    else if (a.expected_yf || a.expected_yh) config.fixed_lambda.reset();
    if (a.kfolds > 1) config.k_folds = a.kfolds;
    config.fold_seed = derive_seed(seed, {1});
    config.label_seed = derive_seed(seed, {2});

    const auto selection = cam::select(preds, table, dag, a.target, config, workers);
    io::write_json(out / "selection.json", cam::selection_to_json(selection, config, a.target, seed));
    json echo{{"dag", a.dag},           {"csv", a.csv},         {"schema", a.schema},
              {"target", a.target},     {"preds", a.preds},     {"lambda", selection.lambda},
              {"gamma", config.gamma},  {"k_folds", a.kfolds},  {"metric", std::string(cam::to_string(metric))},
              {"seed", seed}};
    if (a.expected_yf) echo["expected_yf"] = *a.expected_yf;
    if (a.expected_yh) echo["expected_yh"] = *a.expected_yh;
    write_echo(out, "select", echo);
    os << "best " << selection.best_model_id << "\n";
}

void run_rank(const std::string& results, const std::string& by, std::uint64_t seed, const fs::path& out,
              std::ostream& os) {
    const auto doc = io::read_json(results);
    const auto scores = cam::scores_from_json(doc);
    auto direction = cam::HDirection::minimize;
    if (doc.contains("config") && doc["config"].value("h_direction", "minimize") == "maximize")
        direction = cam::HDirection::maximize;
    const auto order = cam::rank(scores, cam::rank_key_from_string(by), direction);
    io::write_json(out / "ranking.json", {{"by", by}, {"ranking", order}});
    write_echo(out, "rank", {{"results", results}, {"by", by}, {"seed", seed}});
    for (const auto& id : order) os << id << "\n";
}

experiments::ExperimentSpec experiment_spec(const ExperimentArgs& a, std::uint64_t seed, bool seed_given,
                                            std::size_t workers) {
    experiments::ExperimentSpec spec;
    if (!a.config.empty()) {
        spec = experiments::spec_from_json(io::read_json(a.config));
        if (seed_given) spec.seed = seed;
    } else {
        spec.seed = seed;
    }
    if (!a.preset.empty()) spec.preset = experiments::preset_from_string(a.preset);
    else if (a.config.empty()) throw CLI::RequiredError("preset");
    if (!a.n.empty()) spec.n_vertices = a.n;
    if (a.dags) spec.n_dags = *a.dags;
    if (a.models) spec.n_models = *a.models;
    if (a.rows) spec.rows = *a.rows;
    if (a.test_rows) spec.test_rows = *a.test_rows;
    if (a.epochs) spec.epochs = *a.epochs;
    if (a.gamma) spec.gamma = *a.gamma;
    if (a.kfolds) spec.k_folds = *a.kfolds;
    if (a.perturb_count) spec.perturb_count = *a.perturb_count;
    if (a.lambda) spec.lambda = a.lambda;
    if (!a.csv.empty()) spec.csv = a.csv;
    if (!a.schema.empty()) spec.schema = a.schema;
    if (!a.dag.empty()) spec.dag = a.dag;
    if (!a.target.empty()) spec.target = a.target;
    if (!a.holdout_column.empty()) spec.holdout_column = a.holdout_column;
    if (!a.holdout_side.empty()) {
        if (a.holdout_side != "low" && a.holdout_side != "high")
            throw Error(ErrorCode::InvalidConfig, "--holdout-side must be low or high");
        spec.holdout_side = a.holdout_side == "low" ? data::Side::low : data::Side::high;
    }
    if (a.holdout_fraction) spec.holdout_fraction = *a.holdout_fraction;
    if (a.svg) spec.svg = true;
    if (a.drop_missing) spec.drop_missing = true;
    spec.workers = workers;
    return spec;
}

void run_experiment(const experiments::ExperimentSpec& spec, const fs::path& out, std::ostream& os) {
    const auto result = experiments::run(spec);
    experiments::write_outputs(result, out);
    const auto summary = experiments::summary_json(result);
    os << summary.dump(2) << "\n";
}

void run_report(const std::string& run_dir, const fs::path& out, std::ostream& os) {
    const auto doc = io::read_json(fs::path(run_dir) / "report.json");
    if (!doc.contains("summary")) throw Error(ErrorCode::ParseError, "report.json has no summary");
    const auto& summary = doc["summary"];
    io::write_json(out / "summary.json", summary);
    write_echo(out, "report", {{"run", run_dir}});
    os << "preset " << doc.value("preset", "") << "\n";
    for (const auto& row : summary.at("per_n")) {
        os << "n=" << row.at("n").get<std::size_t>();
        for (const auto& [key, value] : row.items())
            if (key != "n") os << " " << key << "=" << value.dump();
        os << "\n";
    }
    for (const auto& row : summary.at("levels")) {
        os << "level=" << row.at("level").dump();
        for (const auto& [key, value] : row.items())
            if (key != "level") os << " " << key << "=" << value.dump();
        os << "\n";
    }
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Causal-assurance model selection toolkit", "causal-gate"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    std::size_t workers = default_workers();
    std::string out_dir = ".";
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "base seed")->envname("CAUSAL_GATE_SEED");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    };

    auto* synth_cmd = app.add_subcommand("synth", "synthetic data");
    synth_cmd->require_subcommand(1);
    auto* gen = synth_cmd->add_subcommand("gen", "sample a random SCM and its train/test tables");
    SynthArgs sa;
    gen->add_option("--n", sa.n, "vertex count");
    gen->add_option("--rows", sa.rows);
    gen->add_option("--test-rows", sa.test_rows);
    gen->add_option("--perturb-count", sa.perturb_count);
    gen->add_option("--perturb-mean", sa.perturb_mean);
    gen->add_option("--perturb-variance", sa.perturb_variance);
    gen->add_option("--dag", sa.dag, "use this DAG instead of a random one");
    gen->add_option("--target", sa.target);
    gen->add_flag("--binary", sa.binary, "Bernoulli(sigmoid) target labels");
    add_common(gen);

    auto* train_cmd = app.add_subcommand("train", "train a model population");
    TrainArgs ta;
    train_cmd->add_option("--csv", ta.csv)->required();
    train_cmd->add_option("--schema", ta.schema)->required();
    train_cmd->add_option("--target", ta.target)->required();
    train_cmd->add_option("--test-csv", ta.test_csv);
    train_cmd->add_option("--models", ta.models);
    train_cmd->add_option("--epochs", ta.epochs);
    train_cmd->add_option("--patience", ta.patience);
    train_cmd->add_option("--batch", ta.batch);
    train_cmd->add_option("--lr", ta.lr);
    train_cmd->add_option("--momentum", ta.momentum);
    train_cmd->add_flag("--drop-missing", ta.drop_missing, "drop rows with empty cells");
    add_common(train_cmd);

    auto* score_cmd = app.add_subcommand("score", "log-likelihood/BIC of data, or f per model");
    SelectArgs sc;
    score_cmd->add_option("--dag", sc.dag)->required();
    score_cmd->add_option("--csv", sc.csv)->required();
    score_cmd->add_option("--schema", sc.schema)->required();
    score_cmd->add_option("--target", sc.target);
    score_cmd->add_option("--preds", sc.preds);
    score_cmd->add_flag("--drop-missing", sc.drop_missing, "drop rows with empty cells");
    add_common(score_cmd);

    auto* select_cmd = app.add_subcommand("select", "causal-assurance selection");
    SelectArgs se;
    select_cmd->add_option("--dag", se.dag)->required();
    select_cmd->add_option("--csv", se.csv)->required();
    select_cmd->add_option("--schema", se.schema)->required();
    select_cmd->add_option("--target", se.target)->required();
    select_cmd->add_option("--preds", se.preds)->required();
    select_cmd->add_option("--lambda", se.lambda);
    select_cmd->add_option("--expected-yf", se.expected_yf);
    select_cmd->add_option("--expected-yh", se.expected_yh);
    select_cmd->add_option("--gamma", se.gamma);
    select_cmd->add_flag("--gamma-mec", se.gamma_mec, "gamma = size of the DAG's equivalence class");
    select_cmd->add_option("--kfolds", se.kfolds);
    select_cmd->add_option("--metric", se.metric, "mse or auroc");
    select_cmd->add_flag("--drop-missing", se.drop_missing, "drop rows with empty cells");
    add_common(select_cmd);

    auto* rank_cmd = app.add_subcommand("rank", "order models from a selection results file");
    std::string results, by = "r";
    rank_cmd->add_option("--results", results)->required();
    rank_cmd->add_option("--by", by, "r, f or h");
    add_common(rank_cmd);

    auto* exp_cmd = app.add_subcommand("experiment", "run an experiment preset");
    ExperimentArgs ea;
    exp_cmd->add_option("preset", ea.preset, "motivating|robustness|subgraph|imposter|classification|ood_csv");
    exp_cmd->add_option("--config", ea.config, "spec JSON (e.g. a previous config_echo.json)");
    exp_cmd->add_option("--n", ea.n, "vertex counts");
    exp_cmd->add_option("--dags", ea.dags);
    exp_cmd->add_option("--models", ea.models);
    exp_cmd->add_option("--rows", ea.rows);
    exp_cmd->add_option("--test-rows", ea.test_rows);
    exp_cmd->add_option("--epochs", ea.epochs);
    exp_cmd->add_option("--lambda", ea.lambda);
    exp_cmd->add_option("--gamma", ea.gamma);
    exp_cmd->add_option("--kfolds", ea.kfolds);
    exp_cmd->add_option("--perturb-count", ea.perturb_count);
    exp_cmd->add_option("--csv", ea.csv);
    exp_cmd->add_option("--schema", ea.schema);
    exp_cmd->add_option("--dag", ea.dag);
    exp_cmd->add_option("--target", ea.target);
    exp_cmd->add_option("--holdout-column", ea.holdout_column);
    exp_cmd->add_option("--holdout-side", ea.holdout_side);
    exp_cmd->add_option("--holdout-fraction", ea.holdout_fraction);
    exp_cmd->add_flag("--svg", ea.svg);
    exp_cmd->add_flag("--drop-missing", ea.drop_missing, "drop CSV rows with empty cells");
    add_common(exp_cmd);

    auto* report_cmd = app.add_subcommand("report", "summarize an experiment run directory");
    std::string run_dir;
    report_cmd->add_option("--run", run_dir)->required();
    add_common(report_cmd);

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error Usage: " << one_line(e.what()) << "\n";
        const CLI::App* failing = &app;
        for (auto* sub : app.get_subcommands()) {
            failing = sub;
            for (auto* inner : sub->get_subcommands()) failing = inner;
        }
        err << failing->help();
        return kExitUsage;
    }

    auto seed_given = [&](CLI::App* sub) { return sub->count("--seed") > 0 || std::getenv("CAUSAL_GATE_SEED"); };
    try {
        const fs::path out_path(out_dir);
        if (gen->parsed()) run_synth(sa, seed, out_path, out);
        else if (train_cmd->parsed()) run_train(ta, seed, workers, out_path, out);
        else if (score_cmd->parsed()) run_score(sc, seed, out_path, out);
        else if (select_cmd->parsed()) run_select(se, seed, workers, out_path, out);
        else if (rank_cmd->parsed()) run_rank(results, by, seed, out_path, out);
        else if (exp_cmd->parsed())
            run_experiment(experiment_spec(ea, seed, seed_given(exp_cmd), workers), out_path, out);
        else if (report_cmd->parsed()) run_report(run_dir, out_path, out);
        return kExitOk;
    } catch (const CLI::RequiredError& e) {
        err << "error Usage: " << one_line(e.what()) << "\n" << exp_cmd->help();
        return kExitUsage;
    } catch (const Error& e) {
        err << "error " << to_string(e.code()) << ": " << one_line(e.what()) << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        err << "error " << to_string(ErrorCode::IoError) << ": " << one_line(e.what()) << "\n";
        return kExitData;
    }
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    return dispatch(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace causal_gate::cli
