#pragma once

#include <cstdint>
#include <vector>

#include "porkcast/core.hpp"
#include "porkcast/ingest.hpp"

namespace porkcast {

/**
 * Eight-market weekly panel with planted lead-lag structure.
 *
 * A latent level follows a mean-reverting AR(1). Markets deciding Monday to
 * Wednesday price the current week's level; Thursday markets (the target
 * among them) blend the current and previous level, so same-week prices of
 * the early markets carry information that two-week-old data does not.
 * Prices are rounded to 3 decimals like the published series.
 */
struct SyntheticOptions {
    int weeks = 322;
    IsoWeek start{2016, 1};
    double level = 1.35;       // long-run mean, EUR/kg
    double phi = 0.97;         // latent persistence
    double sigma = 0.03;       // latent innovation sd
    double noise = 0.004;      // per-market observation noise sd
    double follow = 0.7;       // Thursday markets: weight on the current level
    bool inject_outlier = false;  // drop one interior Huesca price by 1 EUR
};

std::vector<MarketSeries> synthetic_series(std::uint64_t seed, const SyntheticOptions& options = {},
                                           const PublicationCalendar& calendar = PublicationCalendar::spanish_default());

/// align_panel over synthetic_series.
PricePanel synthetic_panel(std::uint64_t seed, const SyntheticOptions& options = {},
                           const PublicationCalendar& calendar = PublicationCalendar::spanish_default());

}  // namespace porkcast
