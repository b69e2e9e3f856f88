#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "porkcast/errors.hpp"
#include "porkcast/sarima.hpp"

using namespace porkcast;

namespace {

std::vector<double> simulate_arma(double phi, double theta, std::size_t n, std::uint64_t seed, double sigma = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> e(0.0, sigma);
    std::vector<double> y(n);
    double prev_y = 0.0, prev_e = 0.0;
    for (std::size_t burn = 0; burn < 200 + n; ++burn) {
        const double shock = e(rng);
        const double v = phi * prev_y + shock + theta * prev_e;
        prev_y = v;
        prev_e = shock;
        if (burn >= 200) y[burn - 200] = v;
    }
    return y;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

}  // namespace

TEST_CASE("spec validation") {
    CHECK_NOTHROW(SarimaSpec{1, 1, 1, 1, 1, 1, 12}.validate());
    CHECK_NOTHROW(SarimaSpec{0, 2, 0, 0, 1, 0, 12}.validate());
    CHECK_THROWS_AS((SarimaSpec{0, 3, 0, 0, 1, 0, 12}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((SarimaSpec{-1, 0, 0, 0, 0, 0, 1}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((SarimaSpec{0, 0, 0, 1, 0, 0, 1}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((SarimaSpec{0, 0, 0, 0, 0, 0, 0}.validate()), std::invalid_argument);
    CHECK(SarimaSpec{1, 1, 1, 1, 1, 1, 12}.coefficient_count() == 4);
    CHECK(SarimaSpec{1, 1, 1, 1, 1, 1, 12}.differencing_span() == 13);
}

TEST_CASE("AR(1) coefficient is recovered") {
    const auto y = simulate_arma(0.8, 0.0, 2000, 1);
    const auto m = sarima_fit(y, SarimaSpec{1, 0, 0, 0, 0, 0, 1}, 1);
    CHECK(m.used_least_squares);
    CHECK(m.ar(0) > 0.75);
    CHECK(m.ar(0) < 0.85);

    // OLS oracle for phi with intercept.
    long double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const std::size_t n = y.size() - 1;
    for (std::size_t t = 1; t < y.size(); ++t) {
        sx += y[t - 1];
        sy += y[t];
        sxx += y[t - 1] * y[t - 1];
        sxy += y[t - 1] * y[t];
    }
    const double phi_ols = static_cast<double>((n * sxy - sx * sy) / (n * sxx - sx * sx));
    CHECK(m.ar(0) == doctest::Approx(phi_ols).epsilon(1e-8));

    SarimaFitOptions simplex;
    simplex.force_simplex = true;
    const auto s = sarima_fit(y, SarimaSpec{1, 0, 0, 0, 0, 0, 1}, 1, simplex);
    CHECK_FALSE(s.used_least_squares);
    CHECK(s.ar(0) == doctest::Approx(m.ar(0)).epsilon(1e-3));
    CHECK(s.css <= m.css * (1.0 + 1e-6));
}

TEST_CASE("MA(1) coefficient is recovered and sits at the CSS minimum") {
    const auto y = simulate_arma(0.0, 0.5, 2000, 2);
    const SarimaSpec spec{0, 0, 1, 0, 0, 0, 1};
    const auto m = sarima_fit(y, spec, 2);
    CHECK(m.ma(0) > 0.42);
    CHECK(m.ma(0) < 0.58);
    // Brute-force 1-D scan of theta at the fitted constant.
    double best_theta = 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (int k = -990; k <= 990; ++k) {
        const double theta = k / 1000.0;
        const double v = css_objective(y, spec, vec({m.constant, theta}));
        if (v < best) {
            best = v;
            best_theta = theta;
        }
    }
    CHECK(std::abs(best_theta - m.ma(0)) <= 2e-3);
    CHECK(m.css <= best + 1e-9 * best);
}

TEST_CASE("ARIMA(0,1,0) has no coefficients and forecasts the last level") {
    const std::vector<double> y = {1.0, 1.2, 1.1, 1.5, 1.4, 1.35, 1.3, 1.5, 1.6, 1.55, 1.4, 1.45};
    SarimaFitOptions no_const;
    no_const.include_constant = false;
    const auto m = sarima_fit(y, SarimaSpec{0, 1, 0, 0, 0, 0, 1}, 0, no_const);
    CHECK(m.spec.coefficient_count() == 0);
    REQUIRE(m.residuals.size() == y.size() - 1);
    for (std::size_t t = 1; t < y.size(); ++t) CHECK(m.residuals[t - 1] == doctest::Approx(y[t] - y[t - 1]));
    for (double f : sarima_forecast(m, 5)) CHECK(f == doctest::Approx(1.45));

    const auto with_c = sarima_fit(y, SarimaSpec{0, 1, 0, 0, 0, 0, 1}, 0);
    const double mean_diff = (1.45 - 1.0) / 11.0;
    CHECK(with_c.constant == doctest::Approx(mean_diff));
    for (std::size_t t = 1; t < y.size(); ++t) {
        CHECK(with_c.residuals[t - 1] == doctest::Approx(y[t] - y[t - 1] - mean_diff));
    }
    const std::vector<double> short_y(y.begin(), y.begin() + 6);
    CHECK_THROWS_AS(sarima_fit(short_y, SarimaSpec{0, 1, 0, 0, 0, 0, 1}, 0), DataError);
}

TEST_CASE("AR(1) forecast is a geometric decay") {
    SarimaModel m;
    m.spec = SarimaSpec{1, 0, 0, 0, 0, 0, 1};
    m.ar = vec({0.6});
    m.include_constant = false;
    m.training_tail = {2.0};
    const auto f = sarima_forecast(m, 6);
    for (int k = 1; k <= 6; ++k) CHECK(f[static_cast<std::size_t>(k - 1)] == doctest::Approx(std::pow(0.6, k) * 2.0));
    CHECK_THROWS_AS(sarima_forecast(m, 0), std::invalid_argument);
}

TEST_CASE("seasonal double difference forecast recursion") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> y(60);
    for (std::size_t t = 0; t < y.size(); ++t) y[t] = 10.0 + std::sin(t * 0.5236) + 0.1 * g(rng) + 0.05 * t;
    SarimaFitOptions no_const;
    no_const.include_constant = false;
    const auto m = sarima_fit(y, SarimaSpec{0, 1, 0, 0, 1, 0, 12}, 0, no_const);
    const auto f = sarima_forecast(m, 30);
    std::vector<double> ext = y;
    for (int k = 0; k < 30; ++k) {
        const std::size_t t = ext.size();
        ext.push_back(ext[t - 1] + ext[t - 12] - ext[t - 13]);
    }
    for (std::size_t k = 0; k < 30; ++k) CHECK(f[k] == doctest::Approx(ext[y.size() + k]).epsilon(1e-12));
}

TEST_CASE("CSS objective examples") {
    const auto y = simulate_arma(0.0, 0.0, 3000, 4, 0.5);
    const SarimaSpec ar1{1, 0, 0, 0, 0, 0, 1};
    const double v = css_objective(y, ar1, vec({0.0}), false);
    // Expectation n * sigma^2 over the n-1 usable residuals, 5 standard deviations.
    const double n = static_cast<double>(y.size() - 1);
    const double expect = n * 0.25;
    CHECK(std::abs(v - expect) < 5.0 * 0.25 * std::sqrt(2.0 * n));

    std::vector<double> longy(500);
    for (std::size_t t = 0; t < longy.size(); ++t) longy[t] = std::sin(static_cast<double>(t));
    CHECK(std::isinf(css_objective(longy, ar1, vec({1.5}), false)));
}

TEST_CASE("CSS at the true parameters beats random perturbations") {
    const auto y = simulate_arma(0.6, 0.3, 3000, 5);
    const SarimaSpec spec{1, 0, 1, 0, 0, 0, 1};
    const double truth = css_objective(y, spec, vec({0.6, 0.3}), false);
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g(0.0, 0.1);
    int worse = 0;
    for (int k = 0; k < 1000; ++k) {
        worse += css_objective(y, spec, vec({0.6 + g(rng), 0.3 + g(rng)}), false) >= truth;
    }
    CHECK(worse >= 990);
}

TEST_CASE("one-step predictions agree with the fitted residuals") {
    const auto y = simulate_arma(0.5, 0.4, 400, 7);
    const SarimaSpec spec{1, 0, 1, 0, 0, 0, 1};
    const auto m = sarima_fit(y, spec, 7);
    const auto pred = sarima_one_step(m, y, 1);
    REQUIRE(pred.size() == y.size() - 1);
    for (std::size_t k = 0; k < pred.size(); ++k) CHECK(y[k + 1] - pred[k] == doctest::Approx(m.residuals[k]).epsilon(1e-9));
    CHECK_THROWS_AS(sarima_one_step(m, y, 0), std::invalid_argument);
}

TEST_CASE("sarima fits are deterministic and serializable") {
    const auto y = simulate_arma(0.3, 0.2, 300, 8);
    const SarimaSpec spec{1, 1, 1, 1, 0, 1, 12};
    const auto a = sarima_fit(y, spec, 11);
    const auto b = sarima_fit(y, spec, 11);
    CHECK(sarima_params(a) == sarima_params(b));
    CHECK(a.css == b.css);
    const auto back = sarima_model_from_json(to_json(a));
    CHECK(sarima_params(back) == sarima_params(a));
    CHECK(sarima_forecast(back, 4) == sarima_forecast(a, 4));
}
