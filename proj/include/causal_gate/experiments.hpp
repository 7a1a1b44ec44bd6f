#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "causal_gate/cam.hpp"
#include "causal_gate/data.hpp"
#include "causal_gate/eval.hpp"
#include "causal_gate/graph.hpp"

namespace causal_gate::experiments {

enum class Preset { motivating, robustness, subgraph, imposter, classification, ood_csv };

std::string_view to_string(Preset preset);
Preset preset_from_string(std::string_view s);

/// Everything a preset run depends on. Scale fields change sizes only; the
/// sequence of pipeline steps is fixed by the preset.
struct ExperimentSpec {
    Preset preset = Preset::robustness;
    std::vector<std::size_t> n_vertices{4};
    std::size_t n_dags = 1;  // seeds, for the motivating preset
    std::size_t n_models = 25;
    std::uint64_t seed = 0;

    std::optional<double> lambda;  // unset: 1.25 for ood_csv, 1 otherwise
    std::size_t gamma = 1;
    std::size_t k_folds = 1;
    double top_fraction = 0.1;

    std::size_t rows = 10000;
    std::size_t test_rows = 2000;
    std::size_t epochs = 20;
    std::size_t patience = 3;
    std::size_t batch_size = 32;
    double learning_rate = 1e-4;
    double momentum = 0.9;

    std::size_t perturb_count = 1;
    double perturb_mean = 1.0;
    double perturb_variance = 2.0;

    std::vector<double> keep_fractions{1.0, 0.75, 0.5, 0.25, 0.0};
    std::vector<int> mutation_counts{0, 1, 2, 4};
    /// Restrict model inputs to these columns (the target is always excluded).
    std::optional<std::vector<std::string>> feature_mask;

    // ood_csv inputs; holdout column and side are drawn from the seed when unset
    std::string csv;
    std::string schema;
    std::string dag;
    std::string target;
    std::optional<std::string> holdout_column;
    std::optional<data::Side> holdout_side;
    double holdout_fraction = 0.2;
    bool drop_missing = false;

    std::size_t workers = 1;
    bool svg = false;

    void validate() const;
    double resolved_lambda() const;
};

nlohmann::json to_json(const ExperimentSpec& spec);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentSpec spec_from_json(const nlohmann::json& doc);

/// One DAG (or seed) of a preset.
struct Run {
    std::size_t n = 0;
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::string target;
    graph::Dag dag;
    std::vector<std::string> perturbed;
    eval::ExperimentReport report;
    std::optional<double> spearman_cam;  // motivating only
    std::optional<double> spearman_h;
};

/// A subgraph or imposter variant of one run.
struct VariantRow {
    std::size_t n = 0;
    std::size_t index = 0;
    double level = 0.0;  // keep fraction or mutation count
    bool feasible = true;
    std::size_t edges = 0;
    std::size_t hamming = 0;
    double top_variant = 0.0;
    double top_truth = 0.0;
    double delta = 0.0;  // top_variant - top_truth
    bool ranking_equals_truth = false;
    bool ranking_equals_h = false;
};

struct ExperimentResult {
    ExperimentSpec spec;
    std::vector<Run> runs;
    std::vector<VariantRow> variants;
};

ExperimentResult run(const ExperimentSpec& spec);

nlohmann::json summary_json(const ExperimentResult& result);
nlohmann::json report_json(const ExperimentResult& result);
std::string report_csv(const ExperimentResult& result);
std::string scatter_csv(const ExperimentResult& result);
std::string scatter_svg(const ExperimentResult& result);

/// config_echo.json, report.json, report.csv, scatter_sel_vs_test.csv and,
/// when requested, scatter.svg.
void write_outputs(const ExperimentResult& result, const std::filesystem::path& out_dir);

}  // namespace causal_gate::experiments
