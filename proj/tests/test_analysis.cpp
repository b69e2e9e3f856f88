#include <doctest.h>

#include <cmath>
#include <random>

#include "porkcast/analysis.hpp"
#include "porkcast/errors.hpp"
#include "test_util.hpp"

using namespace porkcast;

namespace {

// Two-pass textbook Pearson coefficient in long double.
double pearson_oracle(const std::vector<double>& x, const std::vector<double>& y) {
    long double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= x.size();
    my /= y.size();
    long double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

PricePanel panel_of(const std::vector<std::vector<double>>& cols) {
    PricePanel p;
    const std::size_t n = cols.front().size();
    p.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
    p.fill_flags.setConstant(p.values.rows(), p.values.cols(), false);
    for (std::size_t j = 0; j < cols.size(); ++j) {
        p.markets.emplace_back("M" + std::to_string(j));
        for (std::size_t i = 0; i < n; ++i) p.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cols[j][i];
    }
    for (std::size_t i = 0; i < n; ++i) p.weeks.push_back(week_add(IsoWeek(2016, 1), static_cast<long>(i)));
    return p;
}

// OLS t-ratio of the y_{t-1} coefficient via Gauss-Jordan on the normal equations.
double adf_oracle(const std::vector<double>& y, int lags) {
    const std::size_t p = static_cast<std::size_t>(lags) + 2;
    std::vector<std::vector<long double>> rows;
    std::vector<long double> target;
    for (std::size_t t = static_cast<std::size_t>(lags) + 1; t < y.size(); ++t) {
        std::vector<long double> r{1.0L, y[t - 1]};
        for (int i = 1; i <= lags; ++i) r.push_back(y[t - i] - y[t - i - 1]);
        rows.push_back(r);
        target.push_back(y[t] - y[t - 1]);
    }
    // Augmented [X'X | I] to invert.
    std::vector<std::vector<long double>> a(p, std::vector<long double>(2 * p, 0.0L));
    std::vector<long double> xty(p, 0.0L);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        for (std::size_t i = 0; i < p; ++i) {
            xty[i] += rows[k][i] * target[k];
            for (std::size_t j = 0; j < p; ++j) a[i][j] += rows[k][i] * rows[k][j];
        }
    }
    for (std::size_t i = 0; i < p; ++i) a[i][p + i] = 1.0L;
    for (std::size_t c = 0; c < p; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < p; ++r) {
            if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
        }
        std::swap(a[c], a[piv]);
        const long double d = a[c][c];
        for (auto& v : a[c]) v /= d;
        for (std::size_t r = 0; r < p; ++r) {
            if (r == c) continue;
            const long double f = a[r][c];
            for (std::size_t k = 0; k < 2 * p; ++k) a[r][k] -= f * a[c][k];
        }
    }
    std::vector<long double> beta(p, 0.0L);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j) beta[i] += a[i][p + j] * xty[j];
    }
    long double ssr = 0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        long double fit = 0;
        for (std::size_t i = 0; i < p; ++i) fit += rows[k][i] * beta[i];
        ssr += (target[k] - fit) * (target[k] - fit);
    }
    const long double sigma2 = ssr / static_cast<long double>(rows.size() - p);
    return static_cast<double>(beta[1] / std::sqrt(sigma2 * a[1][p + 1]));
}

std::vector<double> ar1(double phi, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> e(0.0, 1.0);
    std::vector<double> y(n);
    double x = 0.0;
    for (auto& v : y) {
        x = phi * x + e(rng);
        v = x;
    }
    return y;
}

}  // namespace

TEST_CASE("pearson examples") {
    const auto m = pearson_matrix(panel_of({{1, 2, 3}, {2, 4, 6}, {3, 2, 1}}));
    CHECK(m.r(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.r(0, 2) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(m.r(1, 1) == 1.0);

    const auto m2 = pearson_matrix(panel_of({{1, 2, 3}, {1, 2, 3.5}}));
    CHECK(m2.r(0, 1) == doctest::Approx(0.9933992677987828).epsilon(1e-12));
    CHECK(m2.at("M1", "M0") == m2.r(0, 1));

    CHECK_THROWS_AS(pearson_matrix(panel_of({{1, 1, 1}, {1, 2, 3}})), DataError);
    CHECK_THROWS_AS(pearson_matrix(panel_of({{1, 2}, {1, 2}})), DataError);
}

TEST_CASE("pearson agrees with the two-pass oracle and is affine invariant") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 3 + rng() % 80;
        std::vector<std::vector<double>> cols(4, std::vector<double>(n));
        for (auto& c : cols) {
            for (auto& v : c) v = 1.5 + g(rng);
        }
        const auto m = pearson_matrix(panel_of(cols));
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = 0; j < 4; ++j) {
                const double expect = i == j ? 1.0 : pearson_oracle(cols[i], cols[j]);
                CHECK(m.r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) ==
                      doctest::Approx(expect).epsilon(1e-10));
                CHECK(std::abs(m.r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) <= 1.0);
            }
        }
        const double a = 0.1 + 5.0 * std::abs(g(rng));
        const double b = g(rng) * 10.0;
        auto scaled = cols;
        for (auto& v : scaled[0]) v = a * v + b;
        const auto ms = pearson_matrix(panel_of(scaled));
        CHECK(ms.r(0, 1) == doctest::Approx(m.r(0, 1)).epsilon(1e-9));
        for (auto& v : scaled[0]) v = -v;
        CHECK(pearson_matrix(panel_of(scaled)).r(0, 1) == doctest::Approx(-m.r(0, 1)).epsilon(1e-9));
    }
}

TEST_CASE("select_markets keeps the target first and orders by correlation") {
    std::mt19937_64 rng(37);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<std::vector<double>> cols(5, std::vector<double>(200));
    for (auto& v : cols[0]) v = g(rng);
    const double noise[5] = {0.0, 0.05, 0.3, 0.1, 3.0};
    for (std::size_t j = 1; j < 5; ++j) {
        for (std::size_t i = 0; i < 200; ++i) cols[j][i] = cols[0][i] + noise[j] * g(rng);
    }
    const auto m = pearson_matrix(panel_of(cols));
    const auto picked = select_markets(m, "M0", 0.9);
    REQUIRE(picked.size() >= 3);
    CHECK(picked[0].id == "M0");
    CHECK(picked[1].id == "M1");
    CHECK(picked[2].id == "M3");
    for (std::size_t k = 2; k < picked.size(); ++k) {
        CHECK(m.at(picked[k - 1].id, "M0") >= m.at(picked[k].id, "M0"));
    }
    CHECK(select_markets(m, "M0", 1.0).size() == 1);
    // Raising the threshold never adds markets.
    std::size_t prev = 100;
    for (double th = -1.0; th <= 1.0; th += 0.05) {
        const auto s = select_markets(m, "M0", th);
        CHECK(s.size() <= prev);
        prev = s.size();
    }
    CHECK_THROWS_AS(select_markets(m, "M9"), std::out_of_range);
}

TEST_CASE("ADF statistic matches a direct OLS computation") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        const auto y = ar1(seed % 2 ? 0.9 : 1.0, 150 + seed, seed);
        for (int k = 0; k <= 4; ++k) {
            const auto r = adf_fixed_lag(y, k);
            CHECK(r.statistic == doctest::Approx(adf_oracle(y, k)).epsilon(1e-8));
            CHECK(r.nobs == y.size() - static_cast<std::size_t>(k) - 1);
        }
    }
}

TEST_CASE("ADF lag selection and rejection flags") {
    const auto y = ar1(0.5, 300, 99);
    const auto r = adf_test(y);
    CHECK(r.lags_used >= 0);
    CHECK(r.lags_used <= adf_default_max_lag(300));
    CHECK(r.statistic == doctest::Approx(adf_fixed_lag(y, r.lags_used).statistic));
    CHECK(r.rejects(Significance::Pct1));
    CHECK(r.critical_values[0] < r.critical_values[1]);
    CHECK(r.critical_values[1] < r.critical_values[2]);
    // Downward closed.
    if (r.rejects(Significance::Pct1)) CHECK(r.rejects(Significance::Pct5));
    if (r.rejects(Significance::Pct5)) CHECK(r.rejects(Significance::Pct10));

    CHECK(adf_default_max_lag(100) == 12);
    CHECK(adf_default_max_lag(322) == 16);
    const auto cv = adf_critical_values(1'000'000);
    for (int i = 0; i < 3; ++i) CHECK(cv[i] == doctest::Approx(kAdfAsymptoticConstant[i]).epsilon(1e-4));

    CHECK_THROWS_AS(adf_test(std::vector<double>(50, 1.0)), DataError);
    CHECK_THROWS_AS(adf_test(std::vector<double>(5, 1.0)), DataError);
    std::vector<double> bad = ar1(0.5, 50, 1);
    bad[10] = std::nan("");
    CHECK_THROWS_AS(adf_test(bad), DataError);
}

TEST_CASE("ADF separates stationary from unit-root series") {
    int rejected_ar = 0;
    int kept_rw = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        rejected_ar += adf_test(ar1(0.2, 300, 1000 + seed)).rejects(Significance::Pct5);
        kept_rw += !adf_test(ar1(1.0, 300, 2000 + seed)).rejects(Significance::Pct5);
    }
    CHECK(rejected_ar >= 38);
    CHECK(kept_rw >= 34);
}

TEST_CASE("ADF finite-sample critical values are calibrated under the null") {
    // Monte Carlo: random walks of length 200, fixed lag 0. Rejection rate at 5%
    // should be near 5%.
    int rejections = 0;
    const int runs = 2000;
    for (int s = 0; s < runs; ++s) {
        rejections += adf_fixed_lag(ar1(1.0, 200, 50'000 + s), 0).rejects(Significance::Pct5);
    }
    const double rate = static_cast<double>(rejections) / runs;
    CHECK(rate > 0.03);
    CHECK(rate < 0.07);
}

TEST_CASE("correlation CSV layout") {
    const auto m = pearson_matrix(panel_of({{1, 2, 3}, {3, 2, 1}}));
    CHECK(m.to_csv() == "market,M0,M1\nM0,1.000000,-1.000000\nM1,-1.000000,1.000000\n");
}
