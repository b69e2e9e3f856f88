#include "porkcast/windowing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "porkcast/errors.hpp"
#include "porkcast/hash.hpp"

namespace porkcast {

AvailabilityOffset availability_offset(const MarketId& market, const LagScenario& scenario,
                                       const PublicationCalendar& calendar, const MarketId& target) {
    const Weekday market_day = calendar.weekday_of(market.id);
    const Weekday target_day = calendar.weekday_of(target.id);
    if (scenario.kind == LagScenario::Kind::PublicDelayed) {
        return {market, scenario.delay_weeks};
    }
    return {market, market_day < target_day ? 0 : 1};
}

SupervisedDataset build_dataset(const PricePanel& panel, const MarketId& target, int window,
                                const LagScenario& scenario, const PublicationCalendar& calendar) {
    if (window < 1) {
        throw std::invalid_argument("window must be >= 1");
    }
    const auto target_col = static_cast<Eigen::Index>(panel.column_of(target.id));
    SupervisedDataset ds;
    ds.scenario = scenario;
    ds.window = window;
    ds.target = target.id;
    int max_offset = 0;
    for (const auto& m : panel.markets) {
        ds.markets.push_back(m.id);
        ds.offsets.push_back(availability_offset(m, scenario, calendar, target).offset_weeks);
        max_offset = std::max(max_offset, ds.offsets.back());
    }
    const long first_row = max_offset + window - 1;
    const long n = static_cast<long>(panel.rows()) - first_row;
    if (n <= 0) {
        throw DataError("window " + std::to_string(window) + " leaves no samples in a panel of " +
                        std::to_string(panel.rows()) + " weeks");
    }
    const auto n_markets = static_cast<Eigen::Index>(panel.cols());
    for (Eigen::Index m = 0; m < n_markets; ++m) {
        for (int k = 0; k < window; ++k) {
            ds.feature_names.push_back({ds.markets[static_cast<std::size_t>(m)], ds.offsets[static_cast<std::size_t>(m)] + k});
        }
    }
    ds.features.resize(n, n_markets * window);
    ds.targets.resize(n);
    ds.target_weeks.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        const long t = first_row + i;
        ds.targets(i) = panel.values(t, target_col);
        ds.target_weeks.push_back(panel.weeks[static_cast<std::size_t>(t)]);
        for (Eigen::Index m = 0; m < n_markets; ++m) {
            const long base = t - ds.offsets[static_cast<std::size_t>(m)];
            for (int k = 0; k < window; ++k) {
                ds.features(i, m * window + k) = panel.values(base - k, m);
            }
        }
    }
    return ds;
}

SupervisedDataset SupervisedDataset::slice(std::size_t begin, std::size_t end) const {
    end = std::min(end, samples());
    begin = std::min(begin, end);
    SupervisedDataset out = *this;
    const auto b = static_cast<Eigen::Index>(begin);
    const auto len = static_cast<Eigen::Index>(end - begin);
    out.features = features.middleRows(b, len);
    out.targets = targets.segment(b, len);
    out.target_weeks.assign(target_weeks.begin() + static_cast<long>(begin),
                            target_weeks.begin() + static_cast<long>(end));
    return out;
}

std::size_t SupervisedDataset::rows_before(const IsoWeek& week) const {
    return static_cast<std::size_t>(std::lower_bound(target_weeks.begin(), target_weeks.end(), week) -
                                    target_weeks.begin());
}

std::string SupervisedDataset::to_csv() const {
    std::string out = "target_week,target";
    for (const auto& f : feature_names) out += "," + f.to_string();
    out += '\n';
    char buf[32];
    for (std::size_t i = 0; i < samples(); ++i) {
        out += target_weeks[i].to_string();
        std::snprintf(buf, sizeof buf, ",%.4f", targets(static_cast<Eigen::Index>(i)));
        out += buf;
        for (Eigen::Index j = 0; j < features.cols(); ++j) {
            std::snprintf(buf, sizeof buf, ",%.4f", features(static_cast<Eigen::Index>(i), j));
            out += buf;
        }
        out += '\n';
    }
    return out;
}

std::string SupervisedDataset::fingerprint() const {
    Fnv1a h;
    h.update(target);
    h.update(scenario.name());
    h.update(static_cast<std::int64_t>(window));
    for (const auto& w : target_weeks) h.update(w.to_string());
    for (Eigen::Index i = 0; i < targets.size(); ++i) h.update(targets(i));
    for (Eigen::Index i = 0; i < features.rows(); ++i)
        for (Eigen::Index j = 0; j < features.cols(); ++j) h.update(features(i, j));
    return h.hex();
}

std::pair<SupervisedDataset, SupervisedDataset> chrono_split(const SupervisedDataset& ds, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("train fraction must lie in (0, 1)");
    }
    const std::size_t n = ds.samples();
    const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction));
    if (n < 2 || n_train == 0 || n_train == n) {
        throw DataError("too few samples (" + std::to_string(n) + ") for a non-empty chronological split");
    }
    return {ds.slice(0, n_train), ds.slice(n_train, n)};
}

std::vector<Eigen::MatrixXd> to_sequences(const Eigen::MatrixXd& features, std::size_t markets, int window,
                                          bool flattened) {
    const auto n_markets = static_cast<Eigen::Index>(markets);
    if (features.cols() != n_markets * window) {
        throw std::invalid_argument("feature count does not match markets x window");
    }
    std::vector<Eigen::MatrixXd> out;
    out.reserve(static_cast<std::size_t>(features.rows()));
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        if (flattened) {
            out.emplace_back(features.row(i));
            continue;
        }
        Eigen::MatrixXd seq(window, n_markets);
        for (int step = 0; step < window; ++step) {
            const int k = window - 1 - step;  // oldest first
            for (Eigen::Index m = 0; m < n_markets; ++m) {
                seq(step, m) = features(i, m * window + k);
            }
        }
        out.push_back(std::move(seq));
    }
    return out;
}

std::vector<Eigen::MatrixXd> to_sequences(const SupervisedDataset& ds, bool flattened) {
    return to_sequences(ds.features, ds.markets.size(), ds.window, flattened);
}

FeatureRow feature_row(const PricePanel& panel, const SupervisedDataset& layout, const IsoWeek& target_week) {
    if (panel.rows() == 0) throw DataError("empty panel");
    FeatureRow row;
    row.values.resize(static_cast<Eigen::Index>(layout.markets.size()) * layout.window);
    const long last = static_cast<long>(panel.rows()) - 1;
    for (std::size_t m = 0; m < layout.markets.size(); ++m) {
        const auto col = static_cast<Eigen::Index>(panel.column_of(layout.markets[m]));
        for (int k = 0; k < layout.window; ++k) {
            const IsoWeek source = week_add(target_week, -(layout.offsets[m] + k));
            long idx = weeks_between(panel.weeks.front(), source);
            if (idx < 0) throw DataError("source week " + source.to_string() + " precedes the panel");
            if (idx > last) {
                idx = last;
                ++row.forward_filled;
            }
            row.values(static_cast<Eigen::Index>(m) * layout.window + k) = panel.values(idx, col);
        }
    }
    return row;
}

}  // namespace porkcast
