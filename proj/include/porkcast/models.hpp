#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "porkcast/linear.hpp"
#include "porkcast/neural.hpp"
#include "porkcast/sarima.hpp"
#include "porkcast/trees.hpp"
#include "porkcast/tuning.hpp"
#include "porkcast/windowing.hpp"

namespace porkcast {

/// The eleven compared model families. XGBoost, LGBM and CatBoost share one GBDT implementation.
enum class ModelFamily { Ridge, ARIMA, SARIMA, SVR, XGBoost, LGBM, RandomForest, ExtraTrees, RNN, LSTM, CatBoost };

struct FamilyInfo {
    ModelFamily family;
    std::string id;       // command line name
    std::string display;  // report name
    bool single_series;   // trained on the target's own history only
};

/// All families in report order.
const std::vector<FamilyInfo>& model_families();
const FamilyInfo& family_info(ModelFamily family);
/// Accepts ids and a few aliases ("sarimax", "random_forest", ...). Throws std::invalid_argument.
ModelFamily family_from_string(const std::string& name);
/// Comma-separated ids or "all".
std::vector<ModelFamily> parse_model_list(const std::string& list);

/**
 * Default search space. Every space has window ~ IntUniform(2, 12); it is
 * inert for the single-series families. The reference hyperparameters lie
 * inside each space. Neural spaces are desk-scale (small layers, few epochs).
 */
SearchSpace default_search_space(ModelFamily family);

/// Reference hyperparameters (public-scenario column), including the window.
Params reference_params(ModelFamily family);

/// Parses "16/4/1" into layer sizes.
std::vector<int> parse_layers(const std::string& text);

using ModelVariant = std::variant<LinearModel, SarimaModel, EnsembleModel, NetworkModel>;

/// A fitted model with the data and settings that produced it.
struct TrainedModel {
    ModelFamily family = ModelFamily::Ridge;
    Params params;
    int window = 0;  // 0 for single-series models
    LagScenario scenario;
    std::string target;
    std::vector<std::string> markets;
    std::vector<int> offsets;
    std::vector<std::string> feature_names;
    std::string trained_on;  // dataset or series fingerprint
    std::uint64_t seed = 0;
    ModelVariant model;

    /// Stable hash of the serialized model.
    std::string fingerprint() const;
};

/// Fits a multi-market family on a supervised dataset. Throws std::invalid_argument for single-series families.
TrainedModel fit_tabular(ModelFamily family, const SupervisedDataset& train, const Params& params, std::uint64_t seed,
                         int threads = 1);

Eigen::VectorXd predict_tabular(const TrainedModel& model, const Eigen::MatrixXd& features);

/// Fits ARIMA/SARIMA on the target's own history. Throws std::invalid_argument for other families.
TrainedModel fit_series(ModelFamily family, std::span<const double> series, const Params& params,
                        std::uint64_t seed);

/// One-step-ahead predictions for indices [from, series.size()) with fixed fitted parameters.
std::vector<double> predict_series(const TrainedModel& model, std::span<const double> series, std::size_t from);

SarimaSpec sarima_spec_from_params(ModelFamily family, const Params& params);

nlohmann::json to_json(const TrainedModel& model);
TrainedModel trained_model_from_json(const nlohmann::json& j);

}  // namespace porkcast
