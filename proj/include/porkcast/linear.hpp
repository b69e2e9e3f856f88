#pragma once

#include <cstdint>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace porkcast {

enum class LinearFamily { Ridge, LinearSVR };

struct LinearModel {
    LinearFamily family = LinearFamily::Ridge;
    Eigen::VectorXd weights;
    double intercept = 0.0;
    // Ridge
    double alpha = 0.0;
    // LinearSVR
    double C = 1.0;
    double epsilon = 0.0;
    std::uint64_t seed = 0;
    bool converged = true;
    double objective = 0.0;  // training objective at the returned point
};

/**
 * Ridge regression with an unpenalized intercept.
 *
 * X and y are centered, then (Xc'Xc + alpha I) w = Xc'yc is solved with a
 * Cholesky factorization and b = mean(y) - mean(X) w.
 * Throws FitError when the system is singular (alpha = 0, rank-deficient X).
 */
LinearModel ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double alpha);

/// ||y - Xw - b||^2 + alpha ||w||^2
double ridge_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double b,
                       double alpha);

struct SvrOptions {
    double C = 1.0;
    double epsilon = 0.1;
    int max_iter = 5000;
    /// Scale features to unit variance inside the solver (weights are mapped back).
    bool standardize = false;
};

/// 0.5 ||w||^2 + C sum max(0, |y_i - x_i w - b| - epsilon)
double svr_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double b,
                     double C, double epsilon);

/**
 * Linear epsilon-insensitive SVR solved in the primal.
 *
 * Normalized subgradient steps with step size shrinking as 1/sqrt(k). Above
 * 64 samples each step uses a mini-batch drawn from a seeded permutation;
 * the full objective is tracked every few steps. The returned point is the
 * better of the averaged iterate (second half of the run) and the best
 * iterate seen. `converged` is false when the best objective still improved
 * by more than 0.1% over the last 10% of iterations.
 */
LinearModel svr_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SvrOptions& options,
                    std::uint64_t seed);

/// Xw + b. Throws std::invalid_argument on a column-count mismatch.
Eigen::VectorXd linear_predict(const LinearModel& model, const Eigen::MatrixXd& X);

nlohmann::json to_json(const LinearModel& model);
LinearModel linear_model_from_json(const nlohmann::json& j);

}  // namespace porkcast
