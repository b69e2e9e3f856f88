#include <doctest.h>

#include <cmath>
#include <random>

#include "porkcast/errors.hpp"
#include "porkcast/evaluation.hpp"
#include "porkcast/synthetic.hpp"

using namespace porkcast;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

EvaluationOptions quick(std::vector<ModelFamily> models, int trials = 5) {
    EvaluationOptions opt;
    opt.models = std::move(models);
    opt.trials = trials;
    return opt;
}

const ReportRow& find_row(const EvaluationReport& r, const std::string& family, const std::string& scenario) {
    for (const auto& row : r.rows) {
        if (row.family == family && row.scenario == scenario) return row;
    }
    throw std::out_of_range("row " + family + "/" + scenario);
}

}  // namespace

TEST_CASE("metric examples") {
    CHECK(rmse(vec({1, 2, 3}), vec({1, 2, 3})) == 0.0);
    CHECK(rmse(vec({0, 0}), vec({1, 1})) == 1.0);
    CHECK(rmse(vec({1, 2, 3}), vec({2, 2, 2})) == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-15));
    CHECK(r2(vec({1, 2, 3}), vec({1, 2, 3})) == 1.0);
    CHECK(r2(vec({1, 2, 3}), vec({2, 2, 2})) == 0.0);
    CHECK_THROWS_AS(rmse(vec({}), vec({})), std::invalid_argument);
    CHECK_THROWS_AS(rmse(vec({1}), vec({1, 2})), std::invalid_argument);
    CHECK_THROWS_AS(r2(vec({1}), vec({1})), std::invalid_argument);
    CHECK_THROWS_AS(r2(vec({2, 2}), vec({1, 2})), DataError);
}

TEST_CASE("metric identities on random vectors") {
    std::mt19937_64 rng(51);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng() % 100);
        Eigen::VectorXd y(n), yhat(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            y(i) = 1.3 + 0.1 * g(rng);
            yhat(i) = y(i) + 0.02 * g(rng);
        }
        const double e = rmse(y, yhat);
        const double sse = (y - yhat).squaredNorm();
        const double sst = (y.array() - y.mean()).matrix().squaredNorm();
        CHECK(std::abs(e * e * static_cast<double>(n) - sse) <= 1e-12 * std::max(1.0, sse));
        CHECK(std::abs(r2(y, yhat) - (1.0 - sse / sst)) <= 1e-12);
        CHECK(r2(y, yhat) <= 1.0);
        CHECK(r2(y, Eigen::VectorXd::Constant(n, y.mean())) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    }
}

TEST_CASE("a perfect stub is sorted first and scores exactly") {
    const auto panel = synthetic_panel(3, {.weeks = 160});
    auto opt = quick({ModelFamily::Ridge});
    opt.custom_models.push_back({"oracle", [](const SupervisedDataset&, const SupervisedDataset& test) {
                                     return Eigen::VectorXd(test.targets);
                                 }});
    opt.custom_models.push_back({"mean", [](const SupervisedDataset& train, const SupervisedDataset& test) {
                                     return Eigen::VectorXd::Constant(test.targets.size(), train.targets.mean()).eval();
                                 }});
    const auto report = scenario_report(panel, MarketId("ES-LLEIDA"), opt);
    for (const auto& sc : report.scenarios) {
        const ReportRow* first = nullptr;
        for (const auto& row : report.rows) {
            if (row.scenario == sc) {
                first = &row;
                break;
            }
        }
        REQUIRE(first);
        CHECK(first->family == "oracle");
        CHECK(first->rmse == 0.0);
        CHECK(first->r2 == 1.0);
        const auto& ridge = find_row(report, "ridge", sc);
        CHECK(ridge.ok);
        CHECK(ridge.test_samples == report.test_weeks.size());
        CHECK(ridge.rmse * ridge.rmse * static_cast<double>(ridge.test_samples) ==
              doctest::Approx(ridge.sse).epsilon(1e-12));
        CHECK(ridge.r2 == doctest::Approx(1.0 - ridge.sse / ridge.sst).epsilon(1e-12));
    }
    // Every row scores the same test weeks.
    CHECK(report.test_weeks.front() == report.test_start);
    CHECK(report.test_targets.size() == report.test_weeks.size());
}

TEST_CASE("single-series rows are identical across scenarios and reports are deterministic") {
    const auto panel = synthetic_panel(4, {.weeks = 160});
    auto opt = quick({ModelFamily::Ridge, ModelFamily::ARIMA, ModelFamily::XGBoost});
    const auto a = scenario_report(panel, MarketId("ES-LLEIDA"), opt);
    CHECK_NOTHROW(check_scenario_invariance(a));
    const auto& pub = find_row(a, "arima", "public");
    const auto& sub = find_row(a, "arima", "subscription");
    CHECK(pub.predictions == sub.predictions);
    CHECK(pub.rmse == sub.rmse);

    opt.threads = 3;
    const auto b = scenario_report(panel, MarketId("ES-LLEIDA"), opt);
    CHECK(a.to_json().dump() == b.to_json().dump());
    CHECK(a.to_text() == b.to_text());

    auto broken = a;
    for (auto& row : broken.rows) {
        if (row.family == "arima" && row.scenario == "subscription") row.rmse += 1e-9;
    }
    CHECK_THROWS_AS(check_scenario_invariance(broken), std::logic_error);
}

TEST_CASE("same-week data improves ridge on a panel with lead-lag structure") {
    const auto panel = synthetic_panel(5);
    const auto report = scenario_report(panel, MarketId("ES-LLEIDA"), quick({ModelFamily::Ridge}, 10));
    CHECK(find_row(report, "ridge", "subscription").rmse < find_row(report, "ridge", "public").rmse);
    const auto text = report.to_text();
    CHECK(text.find("Ridge") != std::string::npos);
    CHECK(text.find("subscription") != std::string::npos);
}

TEST_CASE("fixed test start uses the widest dataset") {
    const auto panel = synthetic_panel(6);
    const auto cal = PublicationCalendar::spanish_default();
    const std::vector<LagScenario> both{LagScenario::public_delayed(2), LagScenario::subscription()};
    const auto start = fixed_test_start(panel, MarketId("ES-LLEIDA"), both, cal);
    const auto widest = build_dataset(panel, MarketId("ES-LLEIDA"), 12, LagScenario::public_delayed(2), cal);
    const auto [train, test] = chrono_split(widest);
    CHECK(start == test.target_weeks.front());
    // Every window under every scenario has these test weeks available.
    for (const auto& sc : both) {
        for (int w = 2; w <= 12; ++w) {
            const auto ds = build_dataset(panel, MarketId("ES-LLEIDA"), w, sc, cal);
            CHECK(ds.target_weeks.front() < start);
            CHECK(ds.target_weeks.back() == panel.weeks.back());
        }
    }
}

TEST_CASE("tune_model matches the report's chosen parameters") {
    const auto panel = synthetic_panel(7, {.weeks = 160});
    const auto opt = quick({ModelFamily::Ridge}, 8);
    const auto report = scenario_report(panel, MarketId("ES-LLEIDA"), opt);
    for (const auto& sc : opt.scenarios) {
        const auto search = tune_model(panel, MarketId("ES-LLEIDA"), ModelFamily::Ridge, sc, opt);
        const auto& row = find_row(report, "ridge", sc.name());
        CHECK(to_json(search.best) == to_json(row.params));
        CHECK(search.best_index == row.best_trial);
        CHECK(search.trials.size() == 8);
    }
}
