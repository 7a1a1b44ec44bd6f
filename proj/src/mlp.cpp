#include "causal_gate/mlp.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "causal_gate/error.hpp"
#include "causal_gate/io.hpp"
#include "causal_gate/parallel.hpp"
#include "causal_gate/rng.hpp"

namespace causal_gate::mlp {

std::size_t Layers::num_parameters() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < 3; ++l) n += static_cast<std::size_t>(w[l].size() + b[l].size());
    return n;
}

std::vector<double> Layers::flatten() const {
    std::vector<double> out;
    out.reserve(num_parameters());
    for (std::size_t l = 0; l < 3; ++l) {
        for (Eigen::Index i = 0; i < w[l].rows(); ++i)
            for (Eigen::Index j = 0; j < w[l].cols(); ++j) out.push_back(w[l](i, j));
        for (Eigen::Index i = 0; i < b[l].size(); ++i) out.push_back(b[l](i));
    }
    return out;
}

void Layers::assign(const std::vector<double>& flat) {
    if (flat.size() != num_parameters()) throw Error(ErrorCode::WidthMismatch, "parameter vector has the wrong length");
    std::size_t k = 0;
    for (std::size_t l = 0; l < 3; ++l) {
        for (Eigen::Index i = 0; i < w[l].rows(); ++i)
            for (Eigen::Index j = 0; j < w[l].cols(); ++j) w[l](i, j) = flat[k++];
        for (Eigen::Index i = 0; i < b[l].size(); ++i) b[l](i) = flat[k++];
    }
}

MlpModel zeros(std::size_t n_inputs, Task task) {
    if (n_inputs < 1) throw Error(ErrorCode::InvalidConfig, "an MLP needs at least one input");
    const auto n = static_cast<Eigen::Index>(n_inputs);
    MlpModel m;
    m.task = task;
    m.layers.w = {Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, 1)};
    m.layers.b = {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(1)};
    return m;
}

MlpModel init(std::size_t n_inputs, Task task, std::uint64_t seed) {
    MlpModel m = zeros(n_inputs, task);
    Rng rng(seed);
    for (auto& w : m.layers.w) {
        const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-a, a);
    }
    return m;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "learning rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(ErrorCode::InvalidConfig, "momentum must be in [0, 1)");
    if (max_epochs < 1) throw Error(ErrorCode::InvalidConfig, "max_epochs must be >= 1");
    if (batch_size < 1) throw Error(ErrorCode::InvalidConfig, "batch size must be >= 1");
    if (patience < 1) throw Error(ErrorCode::InvalidConfig, "patience must be >= 1");
}

DropoutMasks sample_masks(std::size_t rows, std::size_t width, double rate, std::uint64_t seed) {
    Rng rng(seed);
    const double keep = 1.0 / (1.0 - rate);
    auto draw = [&] {
        Eigen::MatrixXd m(rows, width);
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform() < rate ? 0.0 : keep;
        return m;
    };
    DropoutMasks masks;
    masks.hidden1 = draw();
    masks.hidden2 = draw();
    return masks;
}

namespace {

struct Pass {
    Eigen::MatrixXd z1, d1, z2, d2;
    Eigen::VectorXd out;  // pre-activation of the output unit
};

Pass run_forward(const Layers& p, const Eigen::MatrixXd& x, const DropoutMasks* masks) {
    Pass s;
    s.z1 = (x * p.w[0]).rowwise() + p.b[0].transpose();
    s.d1 = s.z1.cwiseMax(0.0);
    if (masks) s.d1 = s.d1.cwiseProduct(masks->hidden1);
    s.z2 = (s.d1 * p.w[1]).rowwise() + p.b[1].transpose();
    s.d2 = s.z2.cwiseMax(0.0);
    if (masks) s.d2 = s.d2.cwiseProduct(masks->hidden2);
    s.out = (s.d2 * p.w[2]).col(0).array() + p.b[2](0);
    return s;
}

double softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }

double sigmoid(double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

double mean_loss(const Eigen::VectorXd& out, const Eigen::VectorXd& y, Loss loss) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        if (loss == Loss::squared_error) {
            const double d = out(i) - y(i);
            total += d * d;
        } else {
            total += softplus(out(i)) - y(i) * out(i);
        }
    }
    return total / static_cast<double>(out.size());
}

void check_shapes(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (static_cast<std::size_t>(x.cols()) != model.num_inputs())
        throw Error(ErrorCode::WidthMismatch, "model expects " + std::to_string(model.num_inputs()) + " inputs, got " +
                                                  std::to_string(x.cols()));
    if (x.rows() != y.size() || x.rows() == 0) throw Error(ErrorCode::LengthMismatch, "batch inputs and targets differ");
}

}  // namespace

LossGradient loss_and_gradient(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Loss loss,
                               const DropoutMasks* masks) {
    check_shapes(model, x, y);
    const auto& p = model.layers;
    const Pass s = run_forward(p, x, masks);
    const double n = static_cast<double>(x.rows());

    Eigen::VectorXd g(s.out.size());
    for (Eigen::Index i = 0; i < g.size(); ++i)
        g(i) = loss == Loss::squared_error ? 2.0 * (s.out(i) - y(i)) / n : (sigmoid(s.out(i)) - y(i)) / n;

    LossGradient r;
    r.loss = mean_loss(s.out, y, loss);
    r.grad.w[2] = s.d2.transpose() * g;
    r.grad.b[2] = Eigen::VectorXd::Constant(1, g.sum());

    Eigen::MatrixXd gz2 = g * p.w[2].transpose();
    if (masks) gz2 = gz2.cwiseProduct(masks->hidden2);
    gz2 = gz2.cwiseProduct((s.z2.array() > 0.0).cast<double>().matrix());
    r.grad.w[1] = s.d1.transpose() * gz2;
    r.grad.b[1] = gz2.colwise().sum().transpose();

    Eigen::MatrixXd gz1 = gz2 * p.w[1].transpose();
    if (masks) gz1 = gz1.cwiseProduct(masks->hidden1);
    gz1 = gz1.cwiseProduct((s.z1.array() > 0.0).cast<double>().matrix());
    r.grad.w[0] = x.transpose() * gz1;
    r.grad.b[0] = gz1.colwise().sum().transpose();
    return r;
}

double loss_value(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Loss loss,
                  const DropoutMasks* masks) {
    check_shapes(model, x, y);
    return mean_loss(run_forward(model.layers, x, masks).out, y, loss);
}

Eigen::VectorXd forward(const MlpModel& model, const Eigen::MatrixXd& x) {
    if (static_cast<std::size_t>(x.cols()) != model.num_inputs())
        throw Error(ErrorCode::WidthMismatch, "model expects " + std::to_string(model.num_inputs()) + " inputs, got " +
                                                  std::to_string(x.cols()));
    Eigen::VectorXd out = run_forward(model.layers, x, nullptr).out;
    if (model.task == Task::binary) out = out.unaryExpr([](double v) { return sigmoid(v); });
    return out;
}

Eigen::MatrixXd feature_matrix(const data::Table& table, const std::vector<std::string>& features) {
    Eigen::MatrixXd x(table.num_rows(), features.size());
    for (std::size_t j = 0; j < features.size(); ++j) {
        const auto idx = table.index_of(features[j]);
        if (!idx) throw Error(ErrorCode::WidthMismatch, "input column '" + features[j] + "' is not in the table");
        const auto& col = table.column(*idx);
        const VariableKind kind = table.spec(*idx).kind;
        const double scale = kind.is_discrete() && kind.cardinality > 1 ? 1.0 / (kind.cardinality - 1) : 1.0;
        for (std::size_t r = 0; r < col.size(); ++r)
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
                kind.is_discrete() ? (kind.cardinality > 1 ? col[r] * scale : 0.0) : col[r];
    }
    return x;
}

Eigen::VectorXd target_vector(const data::Table& table, std::string_view target) {
    const auto& col = table.column(target);
    return Eigen::Map<const Eigen::VectorXd>(col.data(), static_cast<Eigen::Index>(col.size()));
}

std::vector<std::string> default_features(const data::Table& table, std::string_view target) {
    std::vector<std::string> out;
    for (const auto& spec : table.schema())
        if (spec.name != target) out.push_back(spec.name);
    return out;
}

TrainResult train(MlpModel model, const data::Table& train_set, const data::Table& val_set, std::string_view target,
                  const TrainConfig& config) {
    config.validate();
    if ((config.loss == Loss::cross_entropy) != (model.task == Task::binary))
        throw Error(ErrorCode::InvalidConfig, "cross-entropy loss goes with the binary task and only with it");
    if (model.feature_names.empty()) model.feature_names = default_features(train_set, target);
    if (model.feature_names.size() != model.num_inputs())
        throw Error(ErrorCode::WidthMismatch, "feature list does not match the model input width");
    if (model.task == Task::binary) {
        const auto kind = train_set.spec(train_set.require_index(target)).kind;
        if (!(kind.is_discrete() && kind.cardinality == 2))
            throw Error(ErrorCode::KindMismatch, "binary task needs a two-category target");
    }

    const Eigen::MatrixXd x = feature_matrix(train_set, model.feature_names);
    const Eigen::VectorXd y = target_vector(train_set, target);
    const Eigen::MatrixXd xv = feature_matrix(val_set, model.feature_names);
    const Eigen::VectorXd yv = target_vector(val_set, target);
    const std::size_t n = train_set.num_rows();
    const std::size_t width = model.num_inputs();

    Rng rng(derive_seed(config.seed, {0x7472u}));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    Layers velocity = model.layers;
    for (std::size_t l = 0; l < 3; ++l) {
        velocity.w[l].setZero();
        velocity.b[l].setZero();
    }

    TrainResult result;
    result.model = model;
    double best = std::numeric_limits<double>::infinity();
    std::size_t stale = 0;
    Eigen::MatrixXd xb;
    Eigen::VectorXd yb;
    DropoutMasks masks;
    const double keep = 1.0 / (1.0 - kDropoutRate);

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double train_total = 0.0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t rows = std::min(config.batch_size, n - start);
            xb.resize(rows, width);
            yb.resize(rows);
            masks.hidden1.resize(rows, width);
            masks.hidden2.resize(rows, width);
            for (std::size_t r = 0; r < rows; ++r) {
                xb.row(r) = x.row(order[start + r]);
                yb(r) = y(order[start + r]);
            }
            for (Eigen::Index i = 0; i < masks.hidden1.size(); ++i)
                masks.hidden1.data()[i] = rng.uniform() < kDropoutRate ? 0.0 : keep;
            for (Eigen::Index i = 0; i < masks.hidden2.size(); ++i)
                masks.hidden2.data()[i] = rng.uniform() < kDropoutRate ? 0.0 : keep;

            const LossGradient lg = loss_and_gradient(model, xb, yb, config.loss, &masks);
            if (!std::isfinite(lg.loss))
                throw Error(ErrorCode::Diverged, "training loss became non-finite in epoch " + std::to_string(epoch));
            train_total += lg.loss * static_cast<double>(rows);
            for (std::size_t l = 0; l < 3; ++l) {
                velocity.w[l] = config.momentum * velocity.w[l] - config.learning_rate * lg.grad.w[l];
                velocity.b[l] = config.momentum * velocity.b[l] - config.learning_rate * lg.grad.b[l];
                model.layers.w[l] += velocity.w[l];
                model.layers.b[l] += velocity.b[l];
            }
        }
        const double val_loss = loss_value(model, xv, yv, config.loss);
        if (!std::isfinite(val_loss))
            throw Error(ErrorCode::Diverged, "validation loss became non-finite in epoch " + std::to_string(epoch));
        result.history.push_back({epoch, train_total / static_cast<double>(n), val_loss});
        if (val_loss < best) {
            best = val_loss;
            stale = 0;
            result.model = model;
            result.best_epoch = epoch;
        } else if (++stale >= config.patience) {
            break;
        }
    }
    return result;
}

std::vector<double> predict(const MlpModel& model, const data::Table& table) {
    if (model.feature_names.size() != model.num_inputs())
        throw Error(ErrorCode::WidthMismatch, "feature list does not match the model input width");
    const Eigen::VectorXd out = forward(model, feature_matrix(table, model.feature_names));
    return {out.data(), out.data() + out.size()};
}

std::vector<TrainedModel> train_population(std::size_t count, const data::Table& train_set, const data::Table& val_set,
                                           std::string_view target, const TrainConfig& config_template,
                                           std::uint64_t base_seed, std::size_t workers,
                                           const std::optional<std::vector<std::string>>& features) {
    if (count < 1) throw Error(ErrorCode::InvalidConfig, "population size must be >= 1");
    config_template.validate();
    const auto names = features ? *features : default_features(train_set, target);
    if (names.empty()) throw Error(ErrorCode::InvalidConfig, "no input features");
    for (const auto& f : names) {
        train_set.require_index(f);
        if (f == target) throw Error(ErrorCode::InvalidConfig, "the target cannot be an input feature");
    }
    const Task task = config_template.loss == Loss::cross_entropy ? Task::binary : Task::regression;

    std::vector<TrainedModel> out(count);
    parallel_for(count, workers, [&](std::size_t i) {
        const std::uint64_t seed = base_seed + i;
        MlpModel m = init(names.size(), task, seed);
        m.feature_names = names;
        TrainConfig cfg = config_template;
        cfg.seed = seed;
        out[i] = {std::to_string(i), train(std::move(m), train_set, val_set, target, cfg)};
    });
    return out;
}

std::vector<ModelPredictions> predict_population(const std::vector<TrainedModel>& models, const data::Table& table) {
    std::vector<ModelPredictions> out;
    out.reserve(models.size());
    for (const auto& m : models) out.push_back({m.model_id, predict(m.result.model, table)});
    return out;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

}  // namespace

std::vector<ModelPredictions> parse_external_predictions(std::string_view text, std::size_t n_rows) {
    if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
    const auto records = data::parse_csv_records(text);
    const bool multi = !records.empty() && records.front().size() > 1;

    if (!multi) {
        std::vector<double> values;
        std::size_t line = 0;
        for (const auto& rec : records) {
            ++line;
            if (rec.size() == 1 && trim(rec[0]).empty()) continue;
            const auto v = parse_number(rec[0]);
            if (!v) {
                if (line == 1) continue;  // header
                throw Error(ErrorCode::UnparseableValue, "line " + std::to_string(line) + ": '" + rec[0] + "' is not a number");
            }
            values.push_back(*v);
        }
        if (values.size() != n_rows)
            throw Error(ErrorCode::LengthMismatch, "prediction file has " + std::to_string(values.size()) +
                                                       " values for " + std::to_string(n_rows) + " rows");
        return {{"0", std::move(values)}};
    }

    std::size_t first = 0;
    std::size_t col_id = 0, col_row = 1, col_pred = 2;
    if (!parse_number(records.front().at(std::min<std::size_t>(1, records.front().size() - 1)))) {
        const auto& header = records.front();
        auto find = [&](std::string_view name) {
            for (std::size_t i = 0; i < header.size(); ++i)
                if (trim(header[i]) == name) return i;
            throw Error(ErrorCode::MissingColumn, "prediction CSV lacks a '" + std::string(name) + "' column");
        };
        col_id = find("model_id");
        col_row = find("row_index");
        col_pred = find("prediction");
        first = 1;
    }

    std::map<std::string, std::vector<std::optional<double>>> by_model;
    std::vector<std::string> order;
    for (std::size_t i = first; i < records.size(); ++i) {
        const auto& rec = records[i];
        if (rec.size() == 1 && trim(rec[0]).empty()) continue;
        const std::string where = "line " + std::to_string(i + 1);
        if (rec.size() <= std::max({col_id, col_row, col_pred}))
            throw Error(ErrorCode::UnparseableValue, where + ": expected model_id,row_index,prediction");
        const std::string id(trim(rec[col_id]));
        const auto row = parse_number(rec[col_row]);
        const auto pred = parse_number(rec[col_pred]);
        if (!row || *row < 0 || *row != std::floor(*row))
            throw Error(ErrorCode::UnparseableValue, where + ": bad row_index '" + rec[col_row] + "'");
        if (!pred) throw Error(ErrorCode::UnparseableValue, where + ": bad prediction '" + rec[col_pred] + "'");
        auto [it, inserted] = by_model.try_emplace(id, n_rows);
        if (inserted) order.push_back(id);
        const auto r = static_cast<std::size_t>(*row);
        if (r >= n_rows)
            throw Error(ErrorCode::LengthMismatch, where + ": row_index " + std::to_string(r) + " beyond " +
                                                       std::to_string(n_rows) + " rows");
        if (it->second[r]) throw Error(ErrorCode::UnparseableValue, where + ": duplicate row for model '" + id + "'");
        it->second[r] = *pred;
    }
    std::vector<ModelPredictions> out;
    for (const auto& id : order) {
        const auto& slots = by_model.at(id);
        std::vector<double> values;
        values.reserve(n_rows);
        for (std::size_t r = 0; r < n_rows; ++r) {
            if (!slots[r])
                throw Error(ErrorCode::LengthMismatch, "model '" + id + "' has no prediction for row " + std::to_string(r));
            values.push_back(*slots[r]);
        }
        out.push_back({id, std::move(values)});
    }
    return out;
}

std::vector<ModelPredictions> load_external_predictions(const std::filesystem::path& path, std::size_t n_rows) {
    return parse_external_predictions(io::read_file(path), n_rows);
}

std::string predictions_to_csv(const std::vector<ModelPredictions>& models) {
    std::string out = "model_id,row_index,prediction\n";
    for (const auto& m : models)
        for (std::size_t r = 0; r < m.values.size(); ++r)
            out += m.model_id + "," + std::to_string(r) + "," + data::format_double(m.values[r]) + "\n";
    return out;
}

std::string_view to_string(Task task) { return task == Task::binary ? "binary" : "regression"; }

Task task_from_string(std::string_view s) {
    if (s == "regression") return Task::regression;
    if (s == "binary") return Task::binary;
    throw Error(ErrorCode::InvalidConfig, "task must be regression or binary");
}

nlohmann::json to_json(const MlpModel& model) {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < 3; ++l) {
        const auto& w = model.layers.w[l];
        std::vector<double> flat;
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) flat.push_back(w(i, j));
        const auto& b = model.layers.b[l];
        layers.push_back({{"rows", w.rows()},
                          {"cols", w.cols()},
                          {"weights", flat},
                          {"bias", std::vector<double>(b.data(), b.data() + b.size())}});
    }
    return {{"task", std::string(to_string(model.task))}, {"features", model.feature_names}, {"layers", layers}};
}

MlpModel model_from_json(const nlohmann::json& doc) {
    try {
        const auto features = doc.at("features").get<std::vector<std::string>>();
        MlpModel m = zeros(features.size(), task_from_string(doc.at("task").get<std::string>()));
        m.feature_names = features;
        const auto& layers = doc.at("layers");
        if (layers.size() != 3) throw Error(ErrorCode::ParseError, "checkpoint must have three layers");
        for (std::size_t l = 0; l < 3; ++l) {
            auto& w = m.layers.w[l];
            const auto flat = layers[l].at("weights").get<std::vector<double>>();
            const auto bias = layers[l].at("bias").get<std::vector<double>>();
            if (layers[l].at("rows").get<Eigen::Index>() != w.rows() || layers[l].at("cols").get<Eigen::Index>() != w.cols() ||
                flat.size() != static_cast<std::size_t>(w.size()) || bias.size() != static_cast<std::size_t>(w.cols()))
                throw Error(ErrorCode::WidthMismatch, "checkpoint layer " + std::to_string(l) + " has the wrong shape");
            std::size_t k = 0;
            for (Eigen::Index i = 0; i < w.rows(); ++i)
                for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = flat[k++];
            for (std::size_t j = 0; j < bias.size(); ++j) m.layers.b[l](static_cast<Eigen::Index>(j)) = bias[j];
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("malformed checkpoint: ") + e.what());
    }
}

}  // namespace causal_gate::mlp
