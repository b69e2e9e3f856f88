#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "porkcast/core.hpp"
#include "porkcast/ingest.hpp"
#include "porkcast/models.hpp"
#include "porkcast/tuning.hpp"
#include "porkcast/windowing.hpp"

namespace porkcast {

/// sqrt(mean squared error). Throws std::invalid_argument on empty or mismatched input.
double rmse(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat);

/// 1 - SSres / SStot. Throws std::invalid_argument on length < 2 or mismatch, DataError on constant y.
double r2(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat);

/// Test hook: a named predictor fitted on the training rows and scored on the test rows.
struct CustomModel {
    std::string name;
    std::function<Eigen::VectorXd(const SupervisedDataset& train, const SupervisedDataset& test)> fit_predict;
};

struct EvaluationOptions {
    std::vector<ModelFamily> models;
    std::vector<LagScenario> scenarios{LagScenario::public_delayed(2), LagScenario::subscription()};
    int trials = 200;
    std::uint64_t seed = 7;
    int threads = 1;
    /// Fixes the window instead of tuning it.
    std::optional<int> window;
    /// Runs every window 2..12 and adds a best-window summary.
    bool sweep = false;
    /// Refit before every test point instead of a single fit on the training split.
    bool walk_forward = false;
    double train_fraction = 0.8;
    double validation_fraction = 0.2;  // tail of the training split scoring trials
    PublicationCalendar calendar = PublicationCalendar::spanish_default();
    std::vector<CustomModel> custom_models;
};

struct ReportRow {
    std::string model;   // display name
    std::string family;  // family id, or the custom model name
    std::string scenario;
    int window = 0;  // 0 for single-series models
    bool ok = false;
    std::string error;
    double rmse = 0.0;
    double r2 = 0.0;
    std::size_t test_samples = 0;
    double sse = 0.0;  // test residual sum of squares
    double sst = 0.0;  // test total sum of squares
    double validation_rmse = 0.0;
    std::size_t best_trial = 0;
    Params params;
    std::vector<double> predictions;
};

struct WindowSummary {
    std::string model;
    std::string scenario;
    int best_window = 0;
    double rmse = 0.0;
    double r2 = 0.0;
};

struct EvaluationReport {
    std::string target;
    std::vector<std::string> markets;
    std::vector<std::string> scenarios;
    std::uint64_t seed = 0;
    int trials = 0;
    std::string data_fingerprint;
    std::string first_week;
    std::string last_week;
    std::string test_start;
    std::vector<std::string> test_weeks;
    std::vector<double> test_targets;
    std::vector<ReportRow> rows;  // grouped by scenario, R^2 descending within each
    std::vector<WindowSummary> window_summary;

    /// Aligned text: Model | public RMSE | public R2 | subscription RMSE | subscription R2.
    std::string to_text() const;
    nlohmann::json to_json() const;
};

/// Fingerprint of a panel's weeks, markets and values.
std::string panel_fingerprint(const PricePanel& panel);

/**
 * First test week shared by every model: the 80:20 split of the dataset
 * with the widest window (12) under the scenario with the largest offset.
 */
IsoWeek fixed_test_start(const PricePanel& panel, const MarketId& target, const std::vector<LagScenario>& scenarios,
                         const PublicationCalendar& calendar, double train_fraction = 0.8);

/**
 * Tunes each (model, scenario) on the tail of the training split, refits on
 * the whole training split and scores the fixed test weeks. Single-series
 * rows are computed once and copied to every scenario. Failures become rows
 * with ok = false. Deterministic for a given seed regardless of `threads`.
 */
EvaluationReport scenario_report(const PricePanel& panel, const MarketId& target, const EvaluationOptions& options);

/**
 * The hyperparameter search scenario_report runs for one (model, scenario):
 * trials are scored on the tail of the training split before the fixed test weeks.
 */
SearchResult tune_model(const PricePanel& panel, const MarketId& target, ModelFamily family, const LagScenario& scenario,
                        const EvaluationOptions& options);

/// Throws std::logic_error unless every single-series row is identical across scenarios.
void check_scenario_invariance(const EvaluationReport& report);

}  // namespace porkcast
