#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace porkcast {

enum class NetKind { RNN, LSTM };
enum class Activation { ReLU, Tanh, Identity };

std::string to_string(NetKind kind);
std::string to_string(Activation activation);
NetKind net_kind_from_string(const std::string& s);
Activation activation_from_string(const std::string& s);

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/**
 * Stacked recurrent regressor. Every size but the last is a recurrent layer;
 * the last (always 1) is a dense output reading the top layer's final hidden
 * state. With a single entry the output layer reads all time steps directly.
 */
struct NetSpec {
    NetKind kind = NetKind::RNN;
    std::vector<int> layer_sizes{1024, 256, 1};
    double dropout = 0.02;
    /// RNN: hidden activation. LSTM: cell-candidate and cell-output activation (gates stay sigmoid).
    Activation activation = Activation::ReLU;
    int epochs = 500;
    int batch_size = 10;
    AdamOptions adam;
    /// z-score inputs per step feature with training statistics (targets are always standardized).
    bool standardize_inputs = true;

    static NetSpec rnn_default();
    static NetSpec lstm_default();
    /// Throws std::invalid_argument on empty/zero layers, last size != 1, bad dropout, epochs or batch size.
    void validate() const;
};

/// Each sample is a (time_steps x step_features) matrix, oldest step first.
struct InputLayout {
    int time_steps = 1;
    int step_features = 1;

    friend bool operator==(const InputLayout&, const InputLayout&) = default;
};

struct NetworkModel {
    NetSpec spec;
    InputLayout layout;
    Eigen::VectorXd parameters;
    Eigen::VectorXd input_mean;   // per step feature
    Eigen::VectorXd input_scale;  // per step feature
    double target_mean = 0.0;
    double target_scale = 1.0;
    std::vector<double> loss_curve;  // mean training loss per epoch, standardized target units
    std::uint64_t seed = 0;
};

/// Exact parameter count for a spec and layout.
std::size_t parameter_count(const NetSpec& spec, const InputLayout& layout);

/**
 * Glorot-uniform weights (+-sqrt(6 / (fan_in + fan_out))), zero biases,
 * LSTM forget-gate biases 1. Identity standardization. Deterministic per seed.
 */
NetworkModel net_init(const NetSpec& spec, const InputLayout& layout, std::uint64_t seed);

/**
 * Mini-batch Adam on MSE with backpropagation through time. Starts from
 * net_init(spec, layout, seed); batches are reshuffled every epoch from a
 * seeded generator; inverted dropout between layers during training only.
 * Throws FitError (naming the epoch) when the loss becomes non-finite and
 * std::invalid_argument on layout mismatch or fewer samples than batch_size.
 */
NetworkModel net_fit(const std::vector<Eigen::MatrixXd>& sequences, const Eigen::VectorXd& y, const NetSpec& spec,
                     std::uint64_t seed);

/// Deterministic forward pass in price units; dropout disabled.
Eigen::VectorXd net_predict(const NetworkModel& model, const std::vector<Eigen::MatrixXd>& sequences);

struct LossGradient {
    double loss = 0.0;
    Eigen::VectorXd gradient;
};

/**
 * Mean squared error of the raw network output (standardized target units,
 * inputs standardized with the model's statistics) and its analytic gradient
 * with respect to `parameters`. Dropout disabled.
 */
LossGradient net_loss_gradient(const NetworkModel& model, const std::vector<Eigen::MatrixXd>& sequences,
                               const Eigen::VectorXd& y);

/**
 * Max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, floor)
 * where numeric is a central difference with step 1e-5. `floor` keeps
 * parameters whose true gradient is ~0 from turning rounding noise into a
 * large ratio.
 */
double gradient_check(const NetworkModel& model, const Eigen::MatrixXd& sequence, double target,
                      double floor = 1e-6);

nlohmann::json to_json(const NetworkModel& model);
NetworkModel network_model_from_json(const nlohmann::json& j);

}  // namespace porkcast
