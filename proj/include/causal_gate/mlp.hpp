#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "causal_gate/data.hpp"
#include "causal_gate/types.hpp"

namespace causal_gate::mlp {

enum class Task { regression, binary };
enum class Loss { squared_error, cross_entropy };

inline constexpr double kDropoutRate = 0.2;

/// Weights and biases of the three affine layers. Layer l maps a row vector
/// a to a * w[l] + b[l]^T, so w[l] is fan_in x fan_out.
struct Layers {
    std::array<Eigen::MatrixXd, 3> w;
    std::array<Eigen::VectorXd, 3> b;

    std::size_t num_parameters() const;
    std::vector<double> flatten() const;
    void assign(const std::vector<double>& flat);
};

/// in -> in -> in -> 1 with ReLU hidden units and dropout after each hidden
/// layer; the output is linear (regression) or sigmoid (binary).
struct MlpModel {
    Task task = Task::regression;
    std::vector<std::string> feature_names;
    Layers layers;

    std::size_t num_inputs() const { return static_cast<std::size_t>(layers.w[0].rows()); }
};

/// Glorot-uniform weights, zero biases.
MlpModel init(std::size_t n_inputs, Task task, std::uint64_t seed);
MlpModel zeros(std::size_t n_inputs, Task task);

struct TrainConfig {
    double learning_rate = 1e-4;
    double momentum = 0.9;
    std::size_t max_epochs = 20;
    std::size_t batch_size = 32;
    std::size_t patience = 3;
    Loss loss = Loss::squared_error;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    MlpModel model;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
};

/// Keep-masks for the two hidden layers, one row per batch row; entries are
/// 0 or 1/(1 - rate). Absent masks mean inference mode.
struct DropoutMasks {
    Eigen::MatrixXd hidden1;
    Eigen::MatrixXd hidden2;
};

DropoutMasks sample_masks(std::size_t rows, std::size_t width, double rate, std::uint64_t seed);

/// Mean loss over the batch and its gradient with respect to every parameter.
struct LossGradient {
    double loss = 0.0;
    Layers grad;
};

LossGradient loss_and_gradient(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Loss loss,
                               const DropoutMasks* masks = nullptr);

double loss_value(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Loss loss,
                  const DropoutMasks* masks = nullptr);

/// Raw network outputs after the output activation, dropout disabled.
Eigen::VectorXd forward(const MlpModel& model, const Eigen::MatrixXd& x);

/// Inputs are the named columns; discrete columns enter as code / (k - 1).
Eigen::MatrixXd feature_matrix(const data::Table& table, const std::vector<std::string>& features);
Eigen::VectorXd target_vector(const data::Table& table, std::string_view target);

/// Every column except the target, in table order.
std::vector<std::string> default_features(const data::Table& table, std::string_view target);

/// Minibatch SGD with classic momentum on seeded per-epoch shuffles. After
/// each epoch the validation loss is measured without dropout; the weights
/// from the best epoch are returned, and training stops after `patience`
/// epochs without improvement or at max_epochs.
TrainResult train(MlpModel model, const data::Table& train_set, const data::Table& val_set, std::string_view target,
                  const TrainConfig& config);

std::vector<double> predict(const MlpModel& model, const data::Table& table);

struct TrainedModel {
    std::string model_id;
    TrainResult result;
};

/// `count` models that differ only in seed (base_seed + index); ids are the
/// indices. Results do not depend on the worker count.
std::vector<TrainedModel> train_population(std::size_t count, const data::Table& train_set, const data::Table& val_set,
                                           std::string_view target, const TrainConfig& config_template,
                                           std::uint64_t base_seed, std::size_t workers = 1,
                                           const std::optional<std::vector<std::string>>& features = std::nullopt);

std::vector<ModelPredictions> predict_population(const std::vector<TrainedModel>& models, const data::Table& table);

/// One prediction per line (a single model, id "0"), or CSV with columns
/// model_id,row_index,prediction. Every model must cover rows 0..n_rows-1.
std::vector<ModelPredictions> parse_external_predictions(std::string_view text, std::size_t n_rows);
std::vector<ModelPredictions> load_external_predictions(const std::filesystem::path& path, std::size_t n_rows);

std::string predictions_to_csv(const std::vector<ModelPredictions>& models);

nlohmann::json to_json(const MlpModel& model);
MlpModel model_from_json(const nlohmann::json& doc);

std::string_view to_string(Task task);
Task task_from_string(std::string_view s);

}  // namespace causal_gate::mlp
