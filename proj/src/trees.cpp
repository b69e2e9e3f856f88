#include "porkcast/trees.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "porkcast/errors.hpp"
#include "porkcast/hash.hpp"
#include "porkcast/parallel.hpp"

namespace porkcast {

std::size_t MaxFeatures::count(std::size_t d) const {
    switch (kind) {
        case Kind::All: return d;
        case Kind::Sqrt: return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))));
        case Kind::Fraction:
            return std::clamp<std::size_t>(static_cast<std::size_t>(fraction * static_cast<double>(d)), 1, d);
    }
    return d;
}

void TreeParams::validate() const {
    if (max_depth && *max_depth < 0) throw std::invalid_argument("max_depth must be >= 0");
    if (min_samples_split < 2) throw std::invalid_argument("min_samples_split must be >= 2");
    if (!(min_samples_leaf > 0.0)) throw std::invalid_argument("min_samples_leaf must be positive");
    if (min_samples_leaf < 1.0 && min_samples_leaf > 0.5) {
        throw std::invalid_argument("fractional min_samples_leaf must lie in (0, 0.5]");
    }
    if (max_features.kind == MaxFeatures::Kind::Fraction &&
        !(max_features.fraction > 0.0 && max_features.fraction <= 1.0)) {
        throw std::invalid_argument("max_features fraction must lie in (0, 1]");
    }
}

std::size_t TreeParams::min_leaf_count(std::size_t n) const {
    if (min_samples_leaf < 1.0) {
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(min_samples_leaf * static_cast<double>(n))));
    }
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(min_samples_leaf)));
}

double RegressionTree::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
        const auto& n = nodes[static_cast<std::size_t>(i)];
        i = x(n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
}

Eigen::VectorXd RegressionTree::predict(const Eigen::MatrixXd& X) const {
    if (static_cast<std::size_t>(X.cols()) != n_features) {
        throw std::invalid_argument("tree expects " + std::to_string(n_features) + " features, got " +
                                    std::to_string(X.cols()));
    }
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = predict_row(X.row(i));
    return out;
}

int RegressionTree::depth() const {
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        best = std::max(best, d[i]);
        if (!nodes[i].is_leaf()) {
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        }
    }
    return best;
}

std::size_t RegressionTree::leaves() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

namespace {

using Sorted = std::vector<std::vector<int>>;  // per feature, sample positions by ascending value

Sorted presort(const Eigen::MatrixXd& X, const std::vector<int>& rows) {
    Sorted sorted(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index f = 0; f < X.cols(); ++f) {
        auto& s = sorted[static_cast<std::size_t>(f)];
        s.resize(rows.size());
        std::iota(s.begin(), s.end(), 0);
        std::stable_sort(s.begin(), s.end(), [&](int a, int b) {
            return X(rows[static_cast<std::size_t>(a)], f) < X(rows[static_cast<std::size_t>(b)], f);
        });
    }
    return sorted;
}

class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& X, const std::vector<int>& rows, const std::vector<double>& targets,
                const TreeParams& params, std::mt19937_64& rng, Sorted sorted)
        : X_(X), rows_(rows), y_(targets), params_(params), rng_(rng), sorted_(std::move(sorted)),
          min_leaf_(params.min_leaf_count(rows.size())), flags_(rows.size()), buffer_(rows.size()),
          centered_(rows.size()) {
        tree_.n_features = static_cast<std::size_t>(X.cols());
        features_.resize(static_cast<std::size_t>(X.cols()));
        std::iota(features_.begin(), features_.end(), 0);
    }

    RegressionTree build() {
        grow(0, rows_.size(), 0);
        return std::move(tree_);
    }

private:
    double x(int pos, int f) const { return X_(rows_[static_cast<std::size_t>(pos)], f); }

    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double sse = std::numeric_limits<double>::infinity();
    };

    std::vector<int> candidates() {
        const std::size_t d = features_.size();
        const std::size_t k = params_.max_features.count(d);
        if (k >= d) return features_;
        std::vector<int> pool = features_;
        for (std::size_t i = 0; i < k; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, d - 1);
            std::swap(pool[i], pool[pick(rng_)]);
        }
        pool.resize(k);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

    void scan_exhaustive(int f, std::size_t begin, std::size_t end, double total_s, double total_q, Split& best) {
        const auto& seg = sorted_[static_cast<std::size_t>(f)];
        const std::size_t n = end - begin;
        double sl = 0.0;
        double ql = 0.0;
        for (std::size_t i = begin; i + 1 < end; ++i) {
            const int pos = seg[i];
            const double v = centered_[static_cast<std::size_t>(pos)];
            sl += v;
            ql += v * v;
            const std::size_t nl = i - begin + 1;
            const std::size_t nr = n - nl;
            if (nl < min_leaf_) continue;
            if (nr < min_leaf_) break;
            const double a = x(pos, f);
            const double b = x(seg[i + 1], f);
            if (!(a < b)) continue;
            const double sr = total_s - sl;
            const double qr = total_q - ql;
            const double sse = (ql - sl * sl / static_cast<double>(nl)) + (qr - sr * sr / static_cast<double>(nr));
            if (sse < best.sse) {
                double mid = 0.5 * (a + b);
                if (!(mid < b)) mid = a;
                best = {f, mid, sse};
            }
        }
    }

    void scan_random(int f, std::size_t begin, std::size_t end, double total_s, double total_q, Split& best) {
        const auto& seg = sorted_[static_cast<std::size_t>(f)];
        const double lo = x(seg[begin], f);
        const double hi = x(seg[end - 1], f);
        if (!(lo < hi)) return;
        std::uniform_real_distribution<double> draw(lo, hi);
        const double t = draw(rng_);
        const std::size_t n = end - begin;
        double sl = 0.0;
        double ql = 0.0;
        std::size_t nl = 0;
        for (std::size_t i = begin; i < end && x(seg[i], f) <= t; ++i, ++nl) {
            const double v = centered_[static_cast<std::size_t>(seg[i])];
            sl += v;
            ql += v * v;
        }
        const std::size_t nr = n - nl;
        if (nl < min_leaf_ || nr < min_leaf_ || nl == 0 || nr == 0) return;
        const double sr = total_s - sl;
        const double qr = total_q - ql;
        const double sse = (ql - sl * sl / static_cast<double>(nl)) + (qr - sr * sr / static_cast<double>(nr));
        if (sse < best.sse) best = {f, t, sse};
    }

    int grow(std::size_t begin, std::size_t end, int depth) {
        const std::size_t n = end - begin;
        const auto& seg0 = sorted_.empty() ? buffer_ : sorted_[0];
        double mean = 0.0;
        for (std::size_t i = begin; i < end; ++i) mean += y_[static_cast<std::size_t>(seg0[i])];
        mean /= static_cast<double>(n);
        double total_s = 0.0;
        double total_q = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            const auto pos = static_cast<std::size_t>(seg0[i]);
            centered_[pos] = y_[pos] - mean;
            total_s += centered_[pos];
            total_q += centered_[pos] * centered_[pos];
        }
        const int id = static_cast<int>(tree_.nodes.size());
        TreeNode node;
        node.value = mean;
        node.samples = n;
        tree_.nodes.push_back(node);

        const double parent_sse = total_q - total_s * total_s / static_cast<double>(n);
        const bool can_split = !sorted_.empty() && n >= static_cast<std::size_t>(params_.min_samples_split) &&
                               n >= 2 * min_leaf_ && (!params_.max_depth || depth < *params_.max_depth) &&
                               parent_sse > 0.0;
        if (!can_split) return id;

        Split best;
        for (int f : candidates()) {
            if (params_.split_mode == SplitMode::Exhaustive) {
                scan_exhaustive(f, begin, end, total_s, total_q, best);
            } else {
                scan_random(f, begin, end, total_s, total_q, best);
            }
        }
        if (best.feature < 0 || !(best.sse < parent_sse - 1e-12 * parent_sse)) return id;

        std::size_t n_left = 0;
        for (std::size_t i = begin; i < end; ++i) {
            const int pos = seg0[i];
            const bool left = x(pos, best.feature) <= best.threshold;
            flags_[static_cast<std::size_t>(pos)] = left;
            n_left += left ? 1 : 0;
        }
        for (auto& seg : sorted_) {
            auto out_left = buffer_.begin();
            auto out_right = buffer_.begin() + static_cast<long>(n_left);
            for (std::size_t i = begin; i < end; ++i) {
                if (flags_[static_cast<std::size_t>(seg[i])]) {
                    *out_left++ = seg[i];
                } else {
                    *out_right++ = seg[i];
                }
            }
            std::copy(buffer_.begin(), buffer_.begin() + static_cast<long>(n), seg.begin() + static_cast<long>(begin));
        }
        const int left = grow(begin, begin + n_left, depth + 1);
        const int right = grow(begin + n_left, end, depth + 1);
        auto& self = tree_.nodes[static_cast<std::size_t>(id)];
        self.feature = best.feature;
        self.threshold = best.threshold;
        self.left = left;
        self.right = right;
        return id;
    }

    const Eigen::MatrixXd& X_;
    const std::vector<int>& rows_;
    const std::vector<double>& y_;
    const TreeParams& params_;
    std::mt19937_64& rng_;
    Sorted sorted_;
    std::size_t min_leaf_;
    std::vector<char> flags_;
    std::vector<int> buffer_;
    std::vector<double> centered_;
    std::vector<int> features_;
    RegressionTree tree_;
};

void check_xy(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() == 0 || y.size() == 0) throw std::invalid_argument("tree fitting needs at least one sample");
    if (X.rows() != y.size()) throw std::invalid_argument("X and y disagree on sample count");
    if (X.cols() == 0) throw std::invalid_argument("tree fitting needs at least one feature");
}

std::vector<int> all_rows(Eigen::Index n) {
    std::vector<int> rows(static_cast<std::size_t>(n));
    std::iota(rows.begin(), rows.end(), 0);
    return rows;
}

RegressionTree fit_on_rows(const Eigen::MatrixXd& X, const std::vector<int>& rows, const std::vector<double>& targets,
                           const TreeParams& params, std::mt19937_64& rng, Sorted sorted) {
    TreeBuilder builder(X, rows, targets, params, rng, std::move(sorted));
    return builder.build();
}

}  // namespace

RegressionTree cart_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const TreeParams& params,
                        std::uint64_t seed) {
    check_xy(X, y);
    params.validate();
    const auto rows = all_rows(X.rows());
    std::vector<double> targets(y.data(), y.data() + y.size());
    std::mt19937_64 rng(seed);
    return fit_on_rows(X, rows, targets, params, rng, presort(X, rows));
}

EnsembleModel forest_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, EnsembleFamily family,
                         int n_estimators, TreeParams params, std::uint64_t seed, const ForestOptions& options) {
    check_xy(X, y);
    if (family == EnsembleFamily::GBDT) throw std::invalid_argument("forest_fit does not fit GBDT models");
    if (n_estimators < 1) throw std::invalid_argument("n_estimators must be >= 1");
    if (X.rows() < 2) throw std::invalid_argument("forest fitting needs at least 2 samples");
    params.split_mode = family == EnsembleFamily::RandomForest ? SplitMode::Exhaustive : SplitMode::RandomThreshold;
    params.validate();

    EnsembleModel m;
    m.family = family;
    m.bootstrap = options.bootstrap.value_or(family == EnsembleFamily::RandomForest);
    m.seed = seed;
    m.n_features = static_cast<std::size_t>(X.cols());
    m.trees.resize(static_cast<std::size_t>(n_estimators));

    const std::vector<double> targets(y.data(), y.data() + y.size());
    const auto full_rows = all_rows(X.rows());
    const Sorted full_sorted = m.bootstrap ? Sorted{} : presort(X, full_rows);
    parallel_for(m.trees.size(), options.threads, [&](std::size_t i) {
        std::mt19937_64 rng(mix_seed(seed, i));
        if (!m.bootstrap) {
            m.trees[i] = fit_on_rows(X, full_rows, targets, params, rng, full_sorted);
            return;
        }
        std::uniform_int_distribution<int> pick(0, static_cast<int>(X.rows()) - 1);
        std::vector<int> rows(full_rows.size());
        for (auto& r : rows) r = pick(rng);
        std::vector<double> boot_targets(rows.size());
        for (std::size_t k = 0; k < rows.size(); ++k) boot_targets[k] = targets[static_cast<std::size_t>(rows[k])];
        // The builder indexes targets by sample position, so remap the row list to positions of boot_targets.
        m.trees[i] = fit_on_rows(X, rows, boot_targets, params, rng, presort(X, rows));
    });
    return m;
}

EnsembleModel gbdt_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GbdtParams& gp,
                       std::uint64_t seed) {
    check_xy(X, y);
    if (!(gp.learning_rate > 0.0 && gp.learning_rate <= 1.0)) {
        throw std::invalid_argument("learning_rate must lie in (0, 1]");
    }
    if (gp.n_estimators < 0) throw std::invalid_argument("n_estimators must be >= 0");
    if (X.rows() < 2) throw std::invalid_argument("GBDT needs at least 2 samples");
    TreeParams params;
    params.max_depth = gp.max_depth;
    params.min_samples_leaf = gp.min_samples_leaf;
    params.split_mode = SplitMode::Exhaustive;
    params.validate();

    EnsembleModel m;
    m.family = EnsembleFamily::GBDT;
    m.learning_rate = gp.learning_rate;
    m.seed = seed;
    m.n_features = static_cast<std::size_t>(X.cols());
    m.base_prediction = y.mean();

    const auto rows = all_rows(X.rows());
    const Sorted sorted = presort(X, rows);
    Eigen::VectorXd fitted = Eigen::VectorXd::Constant(y.size(), m.base_prediction);
    std::vector<double> residual(static_cast<std::size_t>(y.size()));
    const double n = static_cast<double>(y.size());
    m.training_loss.push_back((y - fitted).squaredNorm() / n);
    for (int stage = 0; stage < gp.n_estimators; ++stage) {
        for (Eigen::Index i = 0; i < y.size(); ++i) residual[static_cast<std::size_t>(i)] = y(i) - fitted(i);
        std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(stage)));
        RegressionTree tree = fit_on_rows(X, rows, residual, params, rng, sorted);
        fitted += gp.learning_rate * tree.predict(X);
        const double loss = (y - fitted).squaredNorm() / n;
        if (loss > m.training_loss.back() * (1.0 + 1e-12) + 1e-300) {
            throw FitError("GBDT training loss increased at stage " + std::to_string(stage));
        }
        m.training_loss.push_back(loss);
        m.trees.push_back(std::move(tree));
    }
    return m;
}

Eigen::VectorXd ensemble_predict(const EnsembleModel& m, const Eigen::MatrixXd& X) {
    if (static_cast<std::size_t>(X.cols()) != m.n_features) {
        throw std::invalid_argument("ensemble expects " + std::to_string(m.n_features) + " features, got " +
                                    std::to_string(X.cols()));
    }
    if (m.family == EnsembleFamily::GBDT) {
        Eigen::VectorXd out = Eigen::VectorXd::Constant(X.rows(), m.base_prediction);
        for (const auto& t : m.trees) out += m.learning_rate * t.predict(X);
        return out;
    }
    if (m.trees.empty()) throw std::invalid_argument("empty forest");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
    for (const auto& t : m.trees) out += t.predict(X);
    return out / static_cast<double>(m.trees.size());
}

namespace {

nlohmann::json node_json(const RegressionTree& t, int i) {
    const auto& n = t.nodes[static_cast<std::size_t>(i)];
    if (n.is_leaf()) return {{"leaf_value", n.value}};
    return {{"feature_index", n.feature},
            {"threshold", n.threshold},
            {"left", node_json(t, n.left)},
            {"right", node_json(t, n.right)}};
}

int node_from_json(const nlohmann::json& j, RegressionTree& t) {
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    if (j.contains("leaf_value")) {
        t.nodes.back().value = j.at("leaf_value").get<double>();
        return id;
    }
    const int feature = j.at("feature_index").get<int>();
    if (feature < 0 || static_cast<std::size_t>(feature) >= t.n_features) {
        throw std::invalid_argument("tree node feature index out of range");
    }
    const double threshold = j.at("threshold").get<double>();
    const int left = node_from_json(j.at("left"), t);
    const int right = node_from_json(j.at("right"), t);
    auto& n = t.nodes[static_cast<std::size_t>(id)];
    n.feature = feature;
    n.threshold = threshold;
    n.left = left;
    n.right = right;
    return id;
}

std::string family_name(EnsembleFamily f) {
    switch (f) {
        case EnsembleFamily::RandomForest: return "random_forest";
        case EnsembleFamily::ExtraTrees: return "extra_trees";
        case EnsembleFamily::GBDT: return "gbdt";
    }
    return "unknown";
}

}  // namespace

nlohmann::json to_json(const RegressionTree& tree) { return node_json(tree, 0); }

RegressionTree tree_from_json(const nlohmann::json& j, std::size_t n_features) {
    RegressionTree t;
    t.n_features = n_features;
    node_from_json(j, t);
    return t;
}

nlohmann::json to_json(const EnsembleModel& m) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : m.trees) trees.push_back(to_json(t));
    nlohmann::json j = {{"family", family_name(m.family)},
                        {"bootstrap", m.bootstrap},
                        {"seed", m.seed},
                        {"n_features", m.n_features},
                        {"trees", std::move(trees)}};
    if (m.family == EnsembleFamily::GBDT) {
        j["learning_rate"] = m.learning_rate;
        j["base_prediction"] = m.base_prediction;
    }
    return j;
}

EnsembleModel ensemble_model_from_json(const nlohmann::json& j) {
    EnsembleModel m;
    const auto family = j.at("family").get<std::string>();
    if (family == "random_forest") {
        m.family = EnsembleFamily::RandomForest;
    } else if (family == "extra_trees") {
        m.family = EnsembleFamily::ExtraTrees;
    } else if (family == "gbdt") {
        m.family = EnsembleFamily::GBDT;
        m.learning_rate = j.at("learning_rate");
        m.base_prediction = j.at("base_prediction");
    } else {
        throw std::invalid_argument("not an ensemble family: " + family);
    }
    m.bootstrap = j.value("bootstrap", false);
    m.seed = j.value("seed", std::uint64_t{0});
    m.n_features = j.at("n_features");
    for (const auto& t : j.at("trees")) m.trees.push_back(tree_from_json(t, m.n_features));
    return m;
}

}  // namespace porkcast
