#include "porkcast/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>

#include "porkcast/errors.hpp"

namespace porkcast {

double CorrelationMatrix::at(std::string_view a, std::string_view b) const {
    auto idx = [&](std::string_view id) -> Eigen::Index {
        for (std::size_t i = 0; i < markets.size(); ++i) {
            if (markets[i].id == id) return static_cast<Eigen::Index>(i);
        }
        throw std::out_of_range("market '" + std::string(id) + "' not in correlation matrix");
    };
    return r(idx(a), idx(b));
}

std::string CorrelationMatrix::to_csv() const {
    std::string out = "market";
    for (const auto& m : markets) out += "," + m.id;
    out += '\n';
    char buf[32];
    for (std::size_t i = 0; i < markets.size(); ++i) {
        out += markets[i].id;
        for (std::size_t j = 0; j < markets.size(); ++j) {
            std::snprintf(buf, sizeof buf, ",%.6f", r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            out += buf;
        }
        out += '\n';
    }
    return out;
}

CorrelationMatrix pearson_matrix(const PricePanel& panel) {
    const Eigen::Index n = panel.values.rows();
    const Eigen::Index k = panel.values.cols();
    if (n < 3) {
        throw DataError("pearson_matrix needs at least 3 rows, got " + std::to_string(n));
    }
    Eigen::MatrixXd centered = panel.values.rowwise() - panel.values.colwise().mean();
    Eigen::VectorXd norms = centered.colwise().norm();
    for (Eigen::Index j = 0; j < k; ++j) {
        if (norms(j) == 0.0) {
            throw DataError("constant column (zero variance) for market " +
                            panel.markets[static_cast<std::size_t>(j)].id);
        }
    }
    CorrelationMatrix out{panel.markets, Eigen::MatrixXd::Identity(k, k)};
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = i + 1; j < k; ++j) {
            const double v = centered.col(i).dot(centered.col(j)) / (norms(i) * norms(j));
            out.r(i, j) = out.r(j, i) = std::clamp(v, -1.0, 1.0);
        }
    }
    return out;
}

std::vector<MarketId> select_markets(const CorrelationMatrix& m, std::string_view target, double threshold) {
    std::size_t t = m.markets.size();
    for (std::size_t i = 0; i < m.markets.size(); ++i) {
        if (m.markets[i].id == target) t = i;
    }
    if (t == m.markets.size()) {
        throw std::out_of_range("target market '" + std::string(target) + "' absent from correlation matrix");
    }
    std::vector<std::size_t> picked;
    for (std::size_t i = 0; i < m.markets.size(); ++i) {
        if (i != t && m.r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) > threshold) {
            picked.push_back(i);
        }
    }
    std::stable_sort(picked.begin(), picked.end(), [&](std::size_t a, std::size_t b) {
        return m.r(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(t)) >
               m.r(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(t));
    });
    std::vector<MarketId> out{m.markets[t]};
    for (auto i : picked) out.push_back(m.markets[i]);
    return out;
}

bool AdfResult::rejects(Significance level) const {
    return std::find(reject_at.begin(), reject_at.end(), level) != reject_at.end();
}

std::array<double, 3> adf_critical_values(std::size_t nobs) {
    // MacKinnon (2010) response surface, constant-only, one variable.
    static constexpr double coef[3][4] = {
        {-3.43035, -6.5393, -16.786, -79.433},
        {-2.86154, -2.8903, -4.234, -40.040},
        {-2.56677, -1.5384, -2.809, 0.0},
    };
    const double t = static_cast<double>(nobs);
    std::array<double, 3> cv{};
    for (int i = 0; i < 3; ++i) {
        cv[i] = coef[i][0] + coef[i][1] / t + coef[i][2] / (t * t) + coef[i][3] / (t * t * t);
    }
    return cv;
}

int adf_default_max_lag(std::size_t n) {
    return static_cast<int>(std::floor(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
}

namespace {

struct AdfRegression {
    double gamma = 0.0;
    double se = 0.0;
    double ssr = 0.0;
    std::size_t nobs = 0;
    std::size_t params = 0;
};

// Regression of dy_t on [1, y_{t-1}, dy_{t-1..t-lags}] for t in [first_t, n).
AdfRegression run_adf_regression(std::span<const double> y, int lags, std::size_t first_t) {
    const std::size_t n = y.size();
    const std::size_t nobs = n - first_t;
    const std::size_t p = static_cast<std::size_t>(lags) + 2;
    if (nobs <= p) {
        throw DataError("ADF regression has " + std::to_string(nobs) + " observations for " + std::to_string(p) +
                        " parameters; series too short");
    }
    Eigen::MatrixXd X(static_cast<Eigen::Index>(nobs), static_cast<Eigen::Index>(p));
    Eigen::VectorXd dy(static_cast<Eigen::Index>(nobs));
    for (std::size_t row = 0; row < nobs; ++row) {
        const std::size_t t = first_t + row;
        const auto r = static_cast<Eigen::Index>(row);
        dy(r) = y[t] - y[t - 1];
        X(r, 0) = 1.0;
        X(r, 1) = y[t - 1];
        for (int i = 1; i <= lags; ++i) {
            X(r, 1 + i) = y[t - static_cast<std::size_t>(i)] - y[t - static_cast<std::size_t>(i) - 1];
        }
    }
    const Eigen::MatrixXd xtx = X.transpose() * X;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 1e-12 * ldlt.vectorD().maxCoeff()) {
        throw DataError("ADF regression is singular (constant series?)");
    }
    const Eigen::VectorXd beta = ldlt.solve(X.transpose() * dy);
    const Eigen::VectorXd resid = dy - X * beta;
    AdfRegression out;
    out.nobs = nobs;
    out.params = p;
    out.ssr = resid.squaredNorm();
    const double sigma2 = out.ssr / static_cast<double>(nobs - p);
    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    e1(1) = 1.0;
    const double var_gamma = sigma2 * ldlt.solve(e1)(1);
    out.gamma = beta(1);
    out.se = std::sqrt(var_gamma);
    return out;
}

void check_series(std::span<const double> y) {
    for (double v : y) {
        if (!std::isfinite(v)) throw DataError("ADF input contains non-finite values");
    }
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    if (y.empty() || *lo == *hi) {
        throw DataError("ADF input is a constant series (zero variance)");
    }
}

AdfResult finish(const AdfRegression& reg, int lags) {
    AdfResult out;
    out.statistic = reg.gamma / reg.se;
    out.lags_used = lags;
    out.nobs = reg.nobs;
    out.critical_values = adf_critical_values(reg.nobs);
    const Significance levels[3] = {Significance::Pct1, Significance::Pct5, Significance::Pct10};
    for (int i = 0; i < 3; ++i) {
        if (out.statistic < out.critical_values[i]) out.reject_at.push_back(levels[i]);
    }
    return out;
}

}  // namespace

AdfResult adf_fixed_lag(std::span<const double> series, int lags) {
    check_series(series);
    if (lags < 0) throw std::invalid_argument("negative ADF lag order");
    return finish(run_adf_regression(series, lags, static_cast<std::size_t>(lags) + 1), lags);
}

AdfResult adf_test(std::span<const double> series, std::optional<int> max_lag) {
    const int cap = max_lag.value_or(adf_default_max_lag(series.size()));
    if (cap < 0) throw std::invalid_argument("negative ADF max_lag");
    if (series.size() < static_cast<std::size_t>(cap) + 10) {
        throw DataError("ADF needs at least max_lag + 10 = " + std::to_string(cap + 10) + " points, got " +
                        std::to_string(series.size()));
    }
    check_series(series);
    const std::size_t common_start = static_cast<std::size_t>(cap) + 1;
    int best_lag = 0;
    double best_aic = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= cap; ++k) {
        const auto reg = run_adf_regression(series, k, common_start);
        const double n = static_cast<double>(reg.nobs);
        const double aic = n * std::log(reg.ssr / n) + 2.0 * static_cast<double>(reg.params);
        if (aic < best_aic) {
            best_aic = aic;
            best_lag = k;
        }
    }
    return finish(run_adf_regression(series, best_lag, static_cast<std::size_t>(best_lag) + 1), best_lag);
}

}  // namespace porkcast
