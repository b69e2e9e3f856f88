#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "porkcast/core.hpp"
#include "porkcast/ingest.hpp"

namespace porkcast {

struct CorrelationMatrix {
    std::vector<MarketId> markets;
    Eigen::MatrixXd r;  // symmetric, unit diagonal

    double at(std::string_view a, std::string_view b) const;
    /// Square CSV: header "market,<id>...", one row per market, 6 decimals.
    std::string to_csv() const;
};

/// Sample Pearson coefficients between every pair of panel columns.
/// Throws DataError for panels with fewer than 3 rows or a constant column.
CorrelationMatrix pearson_matrix(const PricePanel& panel);

/// Target first, then every market with r(market, target) > threshold in descending r.
std::vector<MarketId> select_markets(const CorrelationMatrix& m, std::string_view target, double threshold = 0.98);

enum class Significance { Pct1, Pct5, Pct10 };

struct AdfResult {
    double statistic = 0.0;
    int lags_used = 0;
    std::size_t nobs = 0;
    std::array<double, 3> critical_values{};  // 1%, 5%, 10%
    std::vector<Significance> reject_at;      // downward-closed: 1% implies 5% and 10%

    bool rejects(Significance level) const;
};

/// Asymptotic constant-only Dickey-Fuller critical values (1%, 5%, 10%).
inline constexpr std::array<double, 3> kAdfAsymptoticConstant = {-3.43035, -2.86154, -2.56677};

/// Finite-sample constant-only critical values from the MacKinnon response surface.
std::array<double, 3> adf_critical_values(std::size_t nobs);

/// Default lag cap floor(12 * (n/100)^(1/4)).
int adf_default_max_lag(std::size_t n);

/**
 * Augmented Dickey-Fuller test, constant-only regression
 *
 *   dy_t = c + gamma * y_{t-1} + sum_{i=1..k} phi_i * dy_{t-i} + e_t
 *
 * k is chosen by AIC over 0..max_lag on a common sample, then the regression
 * is re-estimated on the full sample available for that k. The statistic is
 * the t-ratio of gamma.
 */
AdfResult adf_test(std::span<const double> series, std::optional<int> max_lag = std::nullopt);

/// The ADF regression for a fixed lag order, exposed for testing.
AdfResult adf_fixed_lag(std::span<const double> series, int lags);

}  // namespace porkcast
