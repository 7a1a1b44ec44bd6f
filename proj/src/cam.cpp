#include "causal_gate/cam.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "causal_gate/error.hpp"
#include "causal_gate/metrics.hpp"
#include "causal_gate/parallel.hpp"
#include "causal_gate/rng.hpp"
#include "causal_gate/scoring.hpp"

namespace causal_gate::cam {

void CamConfig::validate() const {
    if (fixed_lambda && !(*fixed_lambda >= 0.0 && std::isfinite(*fixed_lambda)))
        throw Error(ErrorCode::InvalidConfig, "fixed lambda must be a finite value >= 0");
    if (gamma < 1) throw Error(ErrorCode::InvalidConfig, "gamma must be >= 1");
    if (!fixed_lambda) {
        if (!expected_yf || !expected_yh)
            throw Error(ErrorCode::InvalidConfig, "estimated lambda needs expected_yf and expected_yh");
        if (!(*expected_yf > 0.0)) throw Error(ErrorCode::InvalidConfig, "expected_yf must be > 0");
        if (*expected_yh == 0.0) throw Error(ErrorCode::DivisionByZero, "expected_yh is zero");
        if (!(*expected_yh > 0.0)) throw Error(ErrorCode::InvalidConfig, "expected_yh must be > 0");
    }
    if (k_folds && *k_folds < 1) throw Error(ErrorCode::InvalidConfig, "k_folds must be >= 1");
}

CamConfig CamConfig::for_metric(HMetric metric) {
    CamConfig c;
    c.h_metric = metric;
    c.h_direction = metric == HMetric::auroc ? HDirection::maximize : HDirection::minimize;
    return c;
}

double estimate_lambda(const CamConfig& config) {
    if (!config.expected_yf || !config.expected_yh)
        throw Error(ErrorCode::InvalidConfig, "estimated lambda needs expected_yf and expected_yh");
    if (*config.expected_yh == 0.0) throw Error(ErrorCode::DivisionByZero, "expected_yh is zero");
    if (config.gamma < 1) throw Error(ErrorCode::InvalidConfig, "gamma must be >= 1");
    return *config.expected_yf / (static_cast<double>(config.gamma) * *config.expected_yh);
}

double resolve_lambda(const CamConfig& config) {
    if (config.fixed_lambda) return *config.fixed_lambda;
    return estimate_lambda(config);
}

ModelScore cam_score(double f, double h, const CamConfig& config, std::string model_id) {
    const double lambda = resolve_lambda(config);
    const double r = config.h_direction == HDirection::minimize ? lambda * f + h : lambda * f - h;
    return {std::move(model_id), f, h, r};
}

std::vector<double> labels_from_probabilities(std::span<const double> probabilities, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> labels(probabilities.size());
    for (std::size_t i = 0; i < probabilities.size(); ++i) labels[i] = rng.uniform() < probabilities[i] ? 1.0 : 0.0;
    return labels;
}

namespace {

std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    if (k <= 1) return {perm};
    if (k > n) throw Error(ErrorCode::TooFewRows, "more folds than selection rows");
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(perm));
    std::vector<std::vector<std::size_t>> folds;
    std::size_t start = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = n / k + (f < n % k ? 1 : 0);
        std::vector<std::size_t> fold(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                      perm.begin() + static_cast<std::ptrdiff_t>(start + size));
        std::sort(fold.begin(), fold.end());
        folds.push_back(std::move(fold));
        start += size;
    }
    return folds;
}

bool all_integral(std::span<const double> values, int cardinality) {
    return std::all_of(values.begin(), values.end(),
                       [&](double v) { return v == std::floor(v) && v >= 0 && v < cardinality; });
}

double h_value(HMetric metric, std::span<const double> truth, std::span<const double> pred) {
    return metric == HMetric::mse ? eval::mse(truth, pred) : eval::auroc(truth, pred);
}

template <typename T>
std::vector<T> gather(const std::vector<T>& values, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(values[i]);
    return out;
}

}  // namespace

Selection select(std::span<const ModelPredictions> models, const data::Table& d_sel, const graph::Dag& dag,
                 std::string_view target, const CamConfig& config, std::size_t workers) {
    if (models.empty()) throw Error(ErrorCode::EmptyModelSet, "no models to select from");
    config.validate();
    graph::validate(dag);
    const std::size_t target_col = d_sel.require_index(target);
    dag.require_index(target);
    const VariableKind target_kind = d_sel.spec(target_col).kind;
    const auto& truth = d_sel.column(target_col);

    const auto folds = make_folds(d_sel.num_rows(), config.k_folds.value_or(1), config.fold_seed);
    std::vector<data::Table> fold_tables;
    std::vector<std::vector<double>> fold_truth;
    for (const auto& fold : folds) {
        fold_tables.push_back(folds.size() == 1 ? d_sel : d_sel.select_rows(fold));
        fold_truth.push_back(gather(truth, fold));
    }

    Selection out;
    out.lambda = resolve_lambda(config);
    out.scores.resize(models.size());
    parallel_for(models.size(), workers, [&](std::size_t m) {
        const auto& pred = models[m].values;
        if (pred.size() != d_sel.num_rows())
            throw Error(ErrorCode::LengthMismatch, "model '" + models[m].model_id + "' has " +
                                                       std::to_string(pred.size()) + " predictions for " +
                                                       std::to_string(d_sel.num_rows()) + " rows");
        std::vector<double> substituted = pred;
        if (target_kind.is_discrete() && !all_integral(pred, target_kind.cardinality))
            substituted = labels_from_probabilities(pred, config.label_seed);

        double f_sum = 0.0, h_sum = 0.0;
        for (std::size_t k = 0; k < folds.size(); ++k) {
            const auto fold_pred = gather(pred, folds[k]);
            const auto fold_sub = gather(substituted, folds[k]);
            const data::Table d_prime = data::substitute_predictions(fold_tables[k], target, fold_sub);
            f_sum += scoring::causal_assurance_term(dag, target, d_prime);
            h_sum += h_value(config.h_metric, fold_truth[k], fold_pred);
        }
        const double kf = static_cast<double>(folds.size());
        out.scores[m] = cam_score(f_sum / kf, h_sum / kf, config, models[m].model_id);
    });

    const auto order = rank(out.scores, RankKey::r, config.h_direction);
    out.best_model_id = order.front();
    return out;
}

std::vector<std::string> rank(std::span<const ModelScore> scores, RankKey key, HDirection direction) {
    auto value = [&](const ModelScore& s) {
        switch (key) {
            case RankKey::r: return s.r;
            case RankKey::f: return s.f;
            case RankKey::h: return direction == HDirection::minimize ? s.h : -s.h;
        }
        return s.r;
    };
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const double va = value(scores[a]);
        const double vb = value(scores[b]);
        if (va != vb) return va < vb;
        return model_id_less(scores[a].model_id, scores[b].model_id);
    });
    std::vector<std::string> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(scores[i].model_id);
    return out;
}

std::string_view to_string(HMetric metric) { return metric == HMetric::mse ? "mse" : "auroc"; }

HMetric h_metric_from_string(std::string_view s) {
    if (s == "mse") return HMetric::mse;
    if (s == "auroc") return HMetric::auroc;
    throw Error(ErrorCode::InvalidConfig, "unknown h metric '" + std::string(s) + "'");
}

std::string_view to_string(RankKey key) {
    switch (key) {
        case RankKey::r: return "r";
        case RankKey::f: return "f";
        case RankKey::h: return "h";
    }
    return "r";
}

RankKey rank_key_from_string(std::string_view s) {
    if (s == "r") return RankKey::r;
    if (s == "f") return RankKey::f;
    if (s == "h") return RankKey::h;
    throw Error(ErrorCode::InvalidConfig, "rank key must be r, f or h");
}

nlohmann::json selection_to_json(const Selection& selection, const CamConfig& config, std::string_view target,
                                 std::uint64_t seed) {
    const auto by_r = rank(selection.scores, RankKey::r, config.h_direction);
    const auto by_h = rank(selection.scores, RankKey::h, config.h_direction);
    auto position = [](const std::vector<std::string>& order, const std::string& id) {
        return static_cast<std::size_t>(std::find(order.begin(), order.end(), id) - order.begin()) + 1;
    };
    nlohmann::json models = nlohmann::json::array();
    for (const auto& s : selection.scores) {
        models.push_back({{"model_id", s.model_id},
                          {"f", s.f},
                          {"h", s.h},
                          {"r", s.r},
                          {"rank_by_r", position(by_r, s.model_id)},
                          {"rank_by_h", position(by_h, s.model_id)}});
    }
    nlohmann::json echo{{"lambda", selection.lambda},
                        {"gamma", config.gamma},
                        {"seed", seed},
                        {"target", std::string(target)},
                        {"h_metric", std::string(to_string(config.h_metric))},
                        {"h_direction", config.h_direction == HDirection::minimize ? "minimize" : "maximize"},
                        {"k_folds", config.k_folds.value_or(1)},
                        {"fold_seed", config.fold_seed},
                        {"label_seed", config.label_seed}};
    if (config.expected_yf) echo["expected_yf"] = *config.expected_yf;
    if (config.expected_yh) echo["expected_yh"] = *config.expected_yh;
    return {{"best_model_id", selection.best_model_id}, {"models", models}, {"config", echo}};
}

std::vector<ModelScore> scores_from_json(const nlohmann::json& doc) {
    try {
        std::vector<ModelScore> out;
        for (const auto& m : doc.at("models"))
            out.push_back({m.at("model_id").get<std::string>(), m.at("f").get<double>(), m.at("h").get<double>(),
                           m.at("r").get<double>()});
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("malformed selection results: ") + e.what());
    }
}

}  // namespace causal_gate::cam
