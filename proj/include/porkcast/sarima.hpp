#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace porkcast {

/// (p, d, q) x (P, D, Q)_M orders. M = 1 means no seasonal part.
struct SarimaSpec {
    int p = 0, d = 0, q = 0;
    int P = 0, D = 0, Q = 0;
    int M = 1;

    /// Throws std::invalid_argument: negative orders, M < 1, d + D > 3, seasonal terms with M = 1.
    void validate() const;
    int differencing_span() const { return d + D * M; }
    int ar_span() const { return p + P * M; }
    int ma_span() const { return q + Q * M; }
    /// Free coefficients, constant excluded.
    int coefficient_count() const { return p + q + P + Q; }
    std::string to_string() const;

    friend bool operator==(const SarimaSpec&, const SarimaSpec&) = default;
};

struct SarimaModel {
    SarimaSpec spec;
    Eigen::VectorXd ar;           // phi_1..p
    Eigen::VectorXd ma;           // theta_1..q
    Eigen::VectorXd seasonal_ar;  // Phi_1..P
    Eigen::VectorXd seasonal_ma;  // Theta_1..Q
    double constant = 0.0;
    bool include_constant = true;
    std::vector<double> residuals;       // one per usable differenced sample
    std::vector<double> training_tail;   // last differencing_span + ar_span levels
    std::vector<double> residual_tail;   // last ma_span residuals (zero padded)
    double css = 0.0;
    std::uint64_t seed = 0;
    bool used_least_squares = false;
};

struct SarimaFitOptions {
    bool include_constant = true;
    /// Use the simplex search even when q = Q = P = 0 (for cross-checking).
    bool force_simplex = false;
    int restarts = 5;
    int max_evaluations = 6000;
};

/**
 * Conditional-sum-of-squares objective.
 *
 * The series is differenced d times and seasonally D times at lag M. The
 * multiplicative AR and MA polynomials are expanded and one-step residuals
 *   e_t = w_t - c - sum a_k w_{t-k} - sum b_k e_{t-k}
 * are accumulated from t = p + P*M with pre-sample residuals set to 0.
 * Parameter layout: [c if include_constant, phi.., theta.., Phi.., Theta..].
 * Returns +infinity when the AR polynomial is explosive or any intermediate
 * is non-finite.
 */
double css_objective(std::span<const double> series, const SarimaSpec& spec, const Eigen::VectorXd& params,
                     bool include_constant = true);

/**
 * Fits a seasonal ARIMA model by CSS.
 *
 * Pure AR specs without seasonal AR are solved exactly by least squares.
 * Everything else runs a Nelder-Mead search from a least-squares AR start
 * plus seeded perturbed restarts; the best objective wins, ties go to the
 * earliest restart.
 */
SarimaModel sarima_fit(std::span<const double> series, const SarimaSpec& spec, std::uint64_t seed,
                       const SarimaFitOptions& options = {});

/// Iterated forecasts with future shocks set to 0, integrated back through the differences.
std::vector<double> sarima_forecast(const SarimaModel& model, int steps);

/**
 * One-step-ahead predictions with fixed parameters over `series` (which
 * usually extends the training data). Returns predictions for indices
 * [from, series.size()). Requires from >= differencing_span + ar_span.
 */
std::vector<double> sarima_one_step(const SarimaModel& model, std::span<const double> series, std::size_t from);

/// Packs model coefficients in css_objective layout.
Eigen::VectorXd sarima_params(const SarimaModel& model);

nlohmann::json to_json(const SarimaModel& model);
SarimaModel sarima_model_from_json(const nlohmann::json& j);

}  // namespace porkcast
