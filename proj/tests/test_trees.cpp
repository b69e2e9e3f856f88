#include <doctest.h>

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include "porkcast/trees.hpp"

using namespace porkcast;

namespace {

struct Problem {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
};

Problem random_problem(std::uint64_t seed, Eigen::Index n = 80, Eigen::Index d = 4) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Problem p{Eigen::MatrixXd(n, d), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) p.X(i, j) = u(rng);
        p.y(i) = (p.X(i, 0) > 0.5 ? 2.0 : 0.0) + p.X(i, 1) * p.X(i, 2) + 0.1 * u(rng);
    }
    return p;
}

double sse(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s;
}

// Independent greedy CART by enumeration of every midpoint on every feature.
// Returns the prediction for each training row.
void oracle_grow(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<Eigen::Index>& rows, int depth,
                 int max_depth, std::vector<double>& out) {
    std::vector<double> ys;
    for (auto r : rows) ys.push_back(y(r));
    const double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
    const double parent = sse(ys);
    double best = parent;
    Eigen::Index best_f = -1;
    double best_t = 0.0;
    if (depth < max_depth && rows.size() >= 2) {
        for (Eigen::Index f = 0; f < X.cols(); ++f) {
            std::vector<double> xs;
            for (auto r : rows) xs.push_back(X(r, f));
            std::sort(xs.begin(), xs.end());
            xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
            for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
                const double t = 0.5 * (xs[k] + xs[k + 1]);
                std::vector<double> l, r;
                for (auto row : rows) (X(row, f) <= t ? l : r).push_back(y(row));
                const double s = sse(l) + sse(r);
                if (s < best - 1e-12) {
                    best = s;
                    best_f = f;
                    best_t = t;
                }
            }
        }
    }
    if (best_f < 0) {
        for (auto r : rows) out[static_cast<std::size_t>(r)] = mean;
        return;
    }
    std::vector<Eigen::Index> l, r;
    for (auto row : rows) (X(row, best_f) <= best_t ? l : r).push_back(row);
    oracle_grow(X, y, l, depth + 1, max_depth, out);
    oracle_grow(X, y, r, depth + 1, max_depth, out);
}

}  // namespace

TEST_CASE("cart examples") {
    TreeParams params;
    Eigen::MatrixXd X(4, 1);
    X << 1, 2, 3, 4;
    const Eigen::VectorXd constant = Eigen::VectorXd::Constant(4, 1.7);
    const auto leaf = cart_fit(X, constant, params, 0);
    CHECK(leaf.nodes.size() == 1);
    CHECK(leaf.nodes[0].value == doctest::Approx(1.7));

    Eigen::VectorXd step(4);
    step << 0, 0, 1, 1;
    params.max_depth = 1;
    const auto stump = cart_fit(X, step, params, 0);
    REQUIRE(stump.nodes.size() == 3);
    CHECK(stump.nodes[0].threshold > 2.0);
    CHECK(stump.nodes[0].threshold < 3.0);
    CHECK(stump.predict(X) == step);

    Eigen::MatrixXd one(1, 2);
    one << 0.3, 0.4;
    const auto single = cart_fit(one, Eigen::VectorXd::Constant(1, 9.0), TreeParams{}, 0);
    CHECK(single.predict_row(one.row(0)) == 9.0);

    CHECK_THROWS_AS(cart_fit(Eigen::MatrixXd(0, 2), Eigen::VectorXd(0), TreeParams{}, 0), std::invalid_argument);
}

TEST_CASE("exhaustive cart agrees with a brute-force greedy oracle") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto p = random_problem(seed, 40 + static_cast<Eigen::Index>(seed), 3);
        for (int depth = 1; depth <= 4; ++depth) {
            TreeParams params;
            params.max_depth = depth;
            const auto tree = cart_fit(p.X, p.y, params, seed);
            std::vector<double> expect(static_cast<std::size_t>(p.X.rows()));
            std::vector<Eigen::Index> all(static_cast<std::size_t>(p.X.rows()));
            std::iota(all.begin(), all.end(), 0);
            oracle_grow(p.X, p.y, all, 0, depth, expect);
            const auto got = tree.predict(p.X);
            for (Eigen::Index i = 0; i < p.X.rows(); ++i) {
                CHECK(got(i) == doctest::Approx(expect[static_cast<std::size_t>(i)]).epsilon(1e-12));
            }
            CHECK(tree.depth() <= depth);
        }
    }
}

TEST_CASE("leaf size bounds are respected") {
    const auto p = random_problem(5, 200);
    for (double leaf : {1.0, 3.0, 7.0, 0.05}) {
        TreeParams params;
        params.min_samples_leaf = leaf;
        params.min_samples_split = 5;
        const auto tree = cart_fit(p.X, p.y, params, 1);
        const std::size_t min_leaf = params.min_leaf_count(200);
        for (const auto& node : tree.nodes) {
            if (node.is_leaf()) CHECK(node.samples >= min_leaf);
            if (!node.is_leaf()) CHECK(node.samples >= 5);
        }
        // Predictions stay inside the target range.
        const auto pred = tree.predict(p.X);
        CHECK(pred.minCoeff() >= p.y.minCoeff() - 1e-12);
        CHECK(pred.maxCoeff() <= p.y.maxCoeff() + 1e-12);
    }
    CHECK(TreeParams{}.min_leaf_count(200) == 1);
    TreeParams frac;
    frac.min_samples_leaf = 0.05;
    CHECK(frac.min_leaf_count(201) == 11);
    CHECK(MaxFeatures{MaxFeatures::Kind::Sqrt, 1.0}.count(16) == 4);
    CHECK(MaxFeatures{MaxFeatures::Kind::Fraction, 0.01}.count(16) == 1);
}

TEST_CASE("forest examples") {
    const auto p = random_problem(9);
    TreeParams params;
    ForestOptions no_boot;
    no_boot.bootstrap = false;
    const auto forest = forest_fit(p.X, p.y, EnsembleFamily::RandomForest, 1, params, 3, no_boot);
    const auto tree = cart_fit(p.X, p.y, params, 3);
    CHECK(ensemble_predict(forest, p.X) == tree.predict(p.X));

    const Eigen::VectorXd constant = Eigen::VectorXd::Constant(p.X.rows(), 1.25);
    for (auto fam : {EnsembleFamily::RandomForest, EnsembleFamily::ExtraTrees}) {
        const auto m = forest_fit(p.X, constant, fam, 10, params, 1);
        const auto pred = ensemble_predict(m, p.X);
        for (Eigen::Index i = 0; i < pred.size(); ++i) CHECK(pred(i) == doctest::Approx(1.25));
    }
}

TEST_CASE("more trees lower the variance across seeds") {
    const auto p = random_problem(12, 100);
    const auto probe = random_problem(13, 25);
    TreeParams params;
    params.max_features = MaxFeatures{MaxFeatures::Kind::Sqrt, 1.0};
    auto spread = [&](EnsembleFamily fam, int n) {
        std::vector<Eigen::VectorXd> preds;
        for (std::uint64_t s = 0; s < 20; ++s) preds.push_back(ensemble_predict(forest_fit(p.X, p.y, fam, n, params, s), probe.X));
        double total = 0.0;
        for (Eigen::Index i = 0; i < probe.X.rows(); ++i) {
            double mean = 0.0;
            for (const auto& v : preds) mean += v(i) / 20.0;
            for (const auto& v : preds) total += (v(i) - mean) * (v(i) - mean);
        }
        return total;
    };
    for (auto fam : {EnsembleFamily::RandomForest, EnsembleFamily::ExtraTrees}) {
        CHECK(spread(fam, 200) < spread(fam, 10));
    }
}

TEST_CASE("forest results do not depend on the thread count") {
    const auto p = random_problem(21, 150, 6);
    TreeParams params;
    params.max_features = MaxFeatures{MaxFeatures::Kind::Sqrt, 1.0};
    for (auto fam : {EnsembleFamily::RandomForest, EnsembleFamily::ExtraTrees}) {
        ForestOptions one;
        ForestOptions four;
        four.threads = 4;
        const auto a = forest_fit(p.X, p.y, fam, 30, params, 77, one);
        const auto b = forest_fit(p.X, p.y, fam, 30, params, 77, four);
        CHECK(to_json(a) == to_json(b));
        CHECK(ensemble_predict(a, p.X) == ensemble_predict(b, p.X));
        const auto back = ensemble_model_from_json(to_json(a));
        CHECK(ensemble_predict(back, p.X) == ensemble_predict(a, p.X));
    }
}

TEST_CASE("gradient boosting examples") {
    Eigen::MatrixXd X(4, 1);
    X << 1, 2, 3, 4;
    Eigen::VectorXd y(4);
    y << 0, 0, 1, 1;

    GbdtParams exact;
    exact.learning_rate = 1.0;
    exact.max_depth = std::nullopt;
    exact.n_estimators = 1;
    const auto one = gbdt_fit(X, y, exact, 0);
    CHECK((ensemble_predict(one, X) - y).cwiseAbs().maxCoeff() < 1e-12);

    GbdtParams none;
    none.n_estimators = 0;
    const auto base = gbdt_fit(X, y, none, 0);
    CHECK(base.trees.empty());
    CHECK(ensemble_predict(base, X) == Eigen::VectorXd::Constant(4, 0.5));

    GbdtParams stumps;
    stumps.learning_rate = 0.5;
    stumps.max_depth = 1;
    stumps.n_estimators = 10;
    const auto m = gbdt_fit(X, y, stumps, 0);
    const Eigen::VectorXd r = ensemble_predict(m, X) - y;
    // Residual magnitude halves each stage: 0.5 * 0.5^10.
    CHECK(r.cwiseAbs().maxCoeff() == doctest::Approx(0.5 * std::pow(0.5, 10)).epsilon(1e-9));
    CHECK(std::sqrt(r.squaredNorm() / 4.0) < 0.05);
    REQUIRE(m.training_loss.size() == 11);
    for (std::size_t k = 1; k < m.training_loss.size(); ++k) CHECK(m.training_loss[k] <= m.training_loss[k - 1]);
}

TEST_CASE("ensemble_predict arithmetic") {
    RegressionTree stub;
    stub.n_features = 1;
    stub.nodes.push_back(TreeNode{-1, 0.0, -1, -1, 2.0, 1});
    EnsembleModel rf;
    rf.family = EnsembleFamily::RandomForest;
    rf.n_features = 1;
    rf.trees = {stub, stub, stub};
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(2, 1);
    CHECK(ensemble_predict(rf, X) == Eigen::VectorXd::Constant(2, 2.0));

    RegressionTree half = stub;
    half.nodes[0].value = 0.5;
    EnsembleModel gb;
    gb.family = EnsembleFamily::GBDT;
    gb.n_features = 1;
    gb.base_prediction = 1.0;
    gb.learning_rate = 0.1;
    gb.trees = {half};
    CHECK(ensemble_predict(gb, X)(0) == doctest::Approx(1.05));
    gb.trees.clear();
    CHECK(ensemble_predict(gb, X)(0) == 1.0);
}
