#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "porkcast/core.hpp"
#include "porkcast/ingest.hpp"

namespace porkcast {

struct AvailabilityOffset {
    MarketId market;
    int offset_weeks = 0;
};

/**
 * Weeks between the target's decision week and the freshest usable value of `market`.
 *
 * PublicDelayed(d) gives d for every market. Under SubscriptionSameWeek a
 * market that publishes strictly earlier in the week than the target is
 * usable the same week (0); same weekday or later, the target itself
 * included, falls back to the previous week (1).
 */
AvailabilityOffset availability_offset(const MarketId& market, const LagScenario& scenario,
                                       const PublicationCalendar& calendar, const MarketId& target);

struct FeatureName {
    std::string market;
    int lag_weeks = 0;  // source week = target week - lag_weeks

    std::string to_string() const { return market + "_lag" + std::to_string(lag_weeks); }
    friend bool operator==(const FeatureName&, const FeatureName&) = default;
};

struct SupervisedDataset {
    Eigen::MatrixXd features;  // samples x (markets * window), market-major
    Eigen::VectorXd targets;
    std::vector<IsoWeek> target_weeks;
    std::vector<FeatureName> feature_names;
    LagScenario scenario;
    int window = 0;
    std::string target;
    std::vector<std::string> markets;  // panel order
    std::vector<int> offsets;          // per market

    std::size_t samples() const { return target_weeks.size(); }
    /// Rows [begin, end).
    SupervisedDataset slice(std::size_t begin, std::size_t end) const;
    /// Number of leading rows whose target week precedes `week`.
    std::size_t rows_before(const IsoWeek& week) const;
    /// Audit dump: header `target_week,target,<market>_lag<k>...`.
    std::string to_csv() const;
    /// Stable 64-bit FNV-1a over targets, weeks and features, hex encoded.
    std::string fingerprint() const;
};

/**
 * One sample per target week t where every lag exists; market m contributes
 * panel values at weeks t - offset(m) - k for k = 0..window-1.
 * Throws DataError when the window leaves no samples.
 */
SupervisedDataset build_dataset(const PricePanel& panel, const MarketId& target, int window,
                                const LagScenario& scenario, const PublicationCalendar& calendar);

/// First floor(n * train_fraction) samples train, the rest test.
std::pair<SupervisedDataset, SupervisedDataset> chrono_split(const SupervisedDataset& ds,
                                                             double train_fraction = 0.8);

/**
 * Recurrent input layout: one matrix per sample with `window` rows ordered
 * oldest to newest and one column per market. Flattened layout gives a
 * single row holding the full feature vector.
 */
std::vector<Eigen::MatrixXd> to_sequences(const SupervisedDataset& ds, bool flattened = false);
std::vector<Eigen::MatrixXd> to_sequences(const Eigen::MatrixXd& features, std::size_t markets, int window,
                                          bool flattened = false);

struct FeatureRow {
    Eigen::RowVectorXd values;
    std::size_t forward_filled = 0;  // cells whose source week lies past the panel end
};

/**
 * Feature vector for `target_week` laid out like `layout` (same markets,
 * offsets and window). The week may lie beyond the panel: source weeks past
 * the last panel week reuse the last value and are counted. Throws DataError
 * when a source week precedes the panel.
 */
FeatureRow feature_row(const PricePanel& panel, const SupervisedDataset& layout, const IsoWeek& target_week);

}  // namespace porkcast
