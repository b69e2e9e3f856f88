#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace porkcast {

enum class SplitMode { Exhaustive, RandomThreshold };

struct MaxFeatures {
    enum class Kind { All, Sqrt, Fraction };
    Kind kind = Kind::All;
    double fraction = 1.0;

    /// Candidate features per node for d input features (at least 1).
    std::size_t count(std::size_t d) const;
};

struct TreeParams {
    std::optional<int> max_depth;  // nullopt = unlimited
    int min_samples_split = 2;
    /// Fraction of the training size when < 1 (rounded up), absolute count otherwise.
    double min_samples_leaf = 1.0;
    MaxFeatures max_features;
    SplitMode split_mode = SplitMode::Exhaustive;

    void validate() const;
    std::size_t min_leaf_count(std::size_t n) const;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // mean target of the node's samples
    std::size_t samples = 0;

    bool is_leaf() const { return feature < 0; }
};

/// Binary regression tree; x[feature] <= threshold goes left.
struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    std::size_t n_features = 0;

    double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
    int depth() const;
    std::size_t leaves() const;
};

/**
 * Greedy squared-error CART.
 *
 * Exhaustive mode scans midpoints between consecutive distinct sorted values;
 * random-threshold mode draws one uniform threshold in (min, max) per
 * candidate feature. A split is taken only if it strictly lowers the node's
 * sum of squared errors. Deterministic per seed. Throws std::invalid_argument
 * on empty input.
 */
RegressionTree cart_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const TreeParams& params,
                        std::uint64_t seed);

enum class EnsembleFamily { RandomForest, ExtraTrees, GBDT };

struct EnsembleModel {
    EnsembleFamily family = EnsembleFamily::RandomForest;
    std::vector<RegressionTree> trees;
    double learning_rate = 1.0;    // GBDT
    double base_prediction = 0.0;  // GBDT
    bool bootstrap = false;
    std::uint64_t seed = 0;
    std::size_t n_features = 0;
    std::vector<double> training_loss;  // GBDT: MSE after base and after each stage
};

struct ForestOptions {
    /// Overrides the family default (RandomForest bootstraps, ExtraTrees does not).
    std::optional<bool> bootstrap;
    int threads = 1;
};

/**
 * RandomForest: bootstrap resample per tree + exhaustive splits.
 * ExtraTrees: full sample per tree + random-threshold splits.
 * Tree i uses seed mix_seed(seed, i) so results do not depend on `threads`.
 */
EnsembleModel forest_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, EnsembleFamily family,
                         int n_estimators, TreeParams params, std::uint64_t seed, const ForestOptions& options = {});

struct GbdtParams {
    double learning_rate = 0.1;
    std::optional<int> max_depth = 3;
    int n_estimators = 100;  // 0 is allowed and yields the base prediction only
    double min_samples_leaf = 1.0;
};

/// Squared-error gradient boosting: mean(y) base, each stage an exhaustive CART on residuals.
EnsembleModel gbdt_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GbdtParams& params,
                       std::uint64_t seed);

/// RF/ERT: mean over trees. GBDT: base + lr * sum of stages.
Eigen::VectorXd ensemble_predict(const EnsembleModel& model, const Eigen::MatrixXd& X);

nlohmann::json to_json(const RegressionTree& tree);
RegressionTree tree_from_json(const nlohmann::json& j, std::size_t n_features);
nlohmann::json to_json(const EnsembleModel& model);
EnsembleModel ensemble_model_from_json(const nlohmann::json& j);

}  // namespace porkcast
