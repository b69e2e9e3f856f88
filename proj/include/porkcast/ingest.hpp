#pragma once

#include <chrono>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "porkcast/core.hpp"

namespace porkcast {

/// Header line of the normalized price CSV.
inline constexpr std::string_view kPriceCsvHeader = "date,market,price_eur_kg";

/**
 * Parses the normalized weekly price CSV.
 *
 * One MarketSeries per distinct market, ordered by market id, each sorted by
 * week. The decision weekday of an observation is the weekday of its date.
 * Throws ParseError with the offending line number.
 */
std::vector<MarketSeries> parse_price_csv(std::string_view text);

/// Inverse of parse_price_csv (rows grouped by market, then week).
std::string serialize_price_csv(const std::vector<MarketSeries>& series);

struct RepairEntry {
    MarketId market;
    IsoWeek week;
    Price original_value;
    Price replaced_value;
    std::string rule = "neighbor-mean";
};

using RepairLog = std::vector<RepairEntry>;

struct RepairResult {
    MarketSeries series;
    RepairLog log;
};

/**
 * Replaces interior spikes by the mean of their two temporal neighbours.
 *
 * A point qualifies when |x_t - (x_{t-1} + x_{t+1}) / 2| > threshold. The
 * most deviant qualifying point (earliest on ties) is repaired, then the
 * scan repeats until nothing qualifies, so the output is a fixed point
 * (each repair strictly lowers sum (x_{t+1} - x_t)^2, which bounds the
 * number of repairs). Endpoints are never touched.
 */
RepairResult repair_outliers(const MarketSeries& series, double threshold = 0.5);

/// Weeks x markets price matrix on a common, gap-filled week grid.
struct PricePanel {
    std::vector<MarketId> markets;
    std::vector<IsoWeek> weeks;
    Eigen::MatrixXd values;                                   // weeks x markets, EUR/kg
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> fill_flags;

    std::size_t rows() const { return weeks.size(); }
    std::size_t cols() const { return markets.size(); }
    /// Column index of a market; throws std::out_of_range when absent.
    std::size_t column_of(std::string_view market) const;
    bool has_market(std::string_view market) const;
};

/// Columns restricted to `markets`, in that order. Throws std::out_of_range for unknown markets.
PricePanel panel_subset(const PricePanel& panel, const std::vector<std::string>& markets);

struct GapFill {
    MarketId market;
    IsoWeek week;
    double filled_value;
    IsoWeek source_week;
};

struct AlignResult {
    PricePanel panel;
    std::vector<GapFill> gaps;
};

/**
 * Aligns series onto the weeks every series covers (first common week to last
 * common week). Interior gaps are forward-filled and flagged.
 * Throws DataError when the series share no week range.
 */
AlignResult align_panel(const std::vector<MarketSeries>& series);

struct Source {
    std::string url;           // http(s)://..., file://... or a local path
    std::string format_hint = "csv";
};

/**
 * Reads a source as UTF-8 text. Network failures and 5xx responses are
 * retried once; status >= 400 raises FetchError carrying the status.
 */
std::string fetch_source(const Source& source, std::chrono::milliseconds timeout = std::chrono::seconds(30));

}  // namespace porkcast
