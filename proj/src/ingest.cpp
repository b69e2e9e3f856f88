#include "porkcast/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>

#include "porkcast/errors.hpp"

namespace porkcast {

namespace {

std::chrono::year_month_day parse_date(std::string_view s) {
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    auto digits = [](std::string_view part) {
        return !part.empty() && std::all_of(part.begin(), part.end(), [](char c) { return c >= '0' && c <= '9'; });
    };
    if (s.size() != 10 || s[4] != '-' || s[7] != '-' || !digits(s.substr(0, 4)) || !digits(s.substr(5, 2)) ||
        !digits(s.substr(8, 2))) {
        throw std::invalid_argument("unparseable date '" + std::string(s) + "'");
    }
    std::from_chars(s.data(), s.data() + 4, y);
    std::from_chars(s.data() + 5, s.data() + 7, m);
    std::from_chars(s.data() + 8, s.data() + 10, d);
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) {
        throw std::invalid_argument("unparseable date '" + std::string(s) + "'");
    }
    return ymd;
}

std::string format_date(std::chrono::year_month_day d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                  static_cast<unsigned>(d.day()));
    return buf;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

std::vector<MarketSeries> parse_price_csv(std::string_view text) {
    if (text.starts_with("\xEF\xBB\xBF")) {
        text.remove_prefix(3);
    }
    std::map<std::string, MarketSeries> by_market;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        line = trim(line);
        if (!header_seen) {
            if (line != kPriceCsvHeader) {
                throw ParseError(line_no, "expected header '" + std::string(kPriceCsvHeader) + "'");
            }
            header_seen = true;
            continue;
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            fields.push_back(trim(line.substr(start, comma - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (fields.size() != 3) {
            throw ParseError(line_no, "malformed row, expected 3 fields but found " + std::to_string(fields.size()));
        }
        if (fields[1].empty()) {
            throw ParseError(line_no, "empty market id");
        }
        PriceObservation obs;
        try {
            const auto date = parse_date(fields[0]);
            obs.week = IsoWeek::from_date(date);
            obs.decision_weekday =
                static_cast<Weekday>(std::chrono::weekday{std::chrono::sys_days{date}}.iso_encoding() - 1);
            obs.price = Price::parse(fields[2]);
        } catch (const std::invalid_argument& e) {
            throw ParseError(line_no, e.what());
        }
        const std::string token(fields[1]);
        auto& series = by_market[token];
        if (series.market.id.empty()) {
            series.market = MarketId(token);
        }
        obs.market = series.market;
        series.observations.push_back(std::move(obs));
    }
    if (!header_seen) {
        throw ParseError(1, "missing header '" + std::string(kPriceCsvHeader) + "'");
    }
    std::vector<MarketSeries> out;
    out.reserve(by_market.size());
    for (auto& [_, s] : by_market) {
        std::stable_sort(s.observations.begin(), s.observations.end(),
                         [](const PriceObservation& a, const PriceObservation& b) { return a.week < b.week; });
        out.push_back(std::move(s));
    }
    return out;
}

std::string serialize_price_csv(const std::vector<MarketSeries>& series) {
    std::string out(kPriceCsvHeader);
    out += '\n';
    for (const auto& s : series) {
        for (const auto& o : s.observations) {
            out += format_date(o.week.date_of(o.decision_weekday));
            out += ',';
            out += o.market.id;
            out += ',';
            out += o.price.to_string();
            out += '\n';
        }
    }
    return out;
}

RepairResult repair_outliers(const MarketSeries& series, double threshold) {
    if (!(threshold >= 0.0)) {
        throw std::invalid_argument("outlier threshold must be non-negative");
    }
    RepairResult result{series, {}};
    auto& obs = result.series.observations;
    if (obs.size() < 3) {
        return result;
    }
    const std::int64_t limit = static_cast<std::int64_t>(std::llround(threshold * 10000.0));
    // Work in 1e-4 units doubled to keep the neighbour mean exact.
    auto twice_dev = [&](std::size_t t) {
        return 2 * obs[t].price.units() - (obs[t - 1].price.units() + obs[t + 1].price.units());
    };
    while (true) {
        // The most deviant point goes first: a spike also inflates its neighbours'
        // deviations, and repairing it usually clears them.
        std::size_t worst = 0;
        std::int64_t worst_dev = 2 * limit;
        for (std::size_t t = 1; t + 1 < obs.size(); ++t) {
            const std::int64_t dev = std::llabs(twice_dev(t));
            if (dev > worst_dev) {
                const std::int64_t twice_mean = obs[t - 1].price.units() + obs[t + 1].price.units();
                const std::int64_t mean = twice_mean >= 0 ? (twice_mean + 1) / 2 : (twice_mean - 1) / 2;
                if (mean == obs[t].price.units()) continue;
                worst = t;
                worst_dev = dev;
            }
        }
        if (worst == 0) break;
        const std::int64_t twice_mean = obs[worst - 1].price.units() + obs[worst + 1].price.units();
        // Half-unit means round half away from zero, matching Price::from_double.
        const std::int64_t mean = twice_mean >= 0 ? (twice_mean + 1) / 2 : (twice_mean - 1) / 2;
        const Price original = obs[worst].price;
        obs[worst].price = Price::from_units(mean);
        result.log.push_back({obs[worst].market, obs[worst].week, original, obs[worst].price, "neighbor-mean"});
    }
    return result;
}

std::size_t PricePanel::column_of(std::string_view market) const {
    for (std::size_t j = 0; j < markets.size(); ++j) {
        if (markets[j].id == market) {
            return j;
        }
    }
    throw std::out_of_range("market '" + std::string(market) + "' not in panel");
}

bool PricePanel::has_market(std::string_view market) const {
    return std::any_of(markets.begin(), markets.end(), [&](const MarketId& m) { return m.id == market; });
}

PricePanel panel_subset(const PricePanel& panel, const std::vector<std::string>& markets) {
    PricePanel out;
    out.weeks = panel.weeks;
    out.values.resize(panel.values.rows(), static_cast<Eigen::Index>(markets.size()));
    out.fill_flags.resize(panel.fill_flags.rows(), static_cast<Eigen::Index>(markets.size()));
    for (std::size_t j = 0; j < markets.size(); ++j) {
        const auto src = static_cast<Eigen::Index>(panel.column_of(markets[j]));
        out.markets.push_back(panel.markets[static_cast<std::size_t>(src)]);
        out.values.col(static_cast<Eigen::Index>(j)) = panel.values.col(src);
        out.fill_flags.col(static_cast<Eigen::Index>(j)) = panel.fill_flags.col(src);
    }
    return out;
}

AlignResult align_panel(const std::vector<MarketSeries>& series) {
    if (series.empty()) {
        throw DataError("align_panel needs at least one series");
    }
    std::set<std::string> seen;
    IsoWeek first;
    IsoWeek last;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        if (!seen.insert(s.market.id).second) {
            throw DataError("market '" + s.market.id + "' appears twice");
        }
        const auto report = validate_series(s);
        if (!report.ok()) {
            throw DataError("series " + s.market.id + " invalid: " + report.violations.front().message);
        }
        if (s.observations.empty()) {
            throw DataError("series " + s.market.id + " is empty; no overlapping week range");
        }
        const IsoWeek f = s.observations.front().week;
        const IsoWeek l = s.observations.back().week;
        if (i == 0) {
            first = f;
            last = l;
        } else {
            first = std::max(first, f);
            last = std::min(last, l);
        }
    }
    if (last < first) {
        throw DataError("no overlapping week range across series");
    }
    AlignResult out;
    auto& panel = out.panel;
    const long n_weeks = weeks_between(first, last) + 1;
    for (long k = 0; k < n_weeks; ++k) {
        panel.weeks.push_back(week_add(first, k));
    }
    panel.values.resize(n_weeks, static_cast<Eigen::Index>(series.size()));
    panel.fill_flags.setConstant(n_weeks, static_cast<Eigen::Index>(series.size()), false);
    for (std::size_t j = 0; j < series.size(); ++j) {
        const auto& s = series[j];
        panel.markets.push_back(s.market);
        const auto& obs = s.observations;
        // Index of the latest observation at or before the current week.
        std::size_t cursor = 0;
        while (cursor + 1 < obs.size() && obs[cursor + 1].week <= first) {
            ++cursor;
        }
        for (long k = 0; k < n_weeks; ++k) {
            const IsoWeek w = panel.weeks[static_cast<std::size_t>(k)];
            while (cursor + 1 < obs.size() && obs[cursor + 1].week <= w) {
                ++cursor;
            }
            const auto& o = obs[cursor];
            panel.values(k, static_cast<Eigen::Index>(j)) = o.price.value();
            if (o.week != w) {
                panel.fill_flags(k, static_cast<Eigen::Index>(j)) = true;
                out.gaps.push_back({s.market, w, o.price.value(), o.week});
            }
        }
    }
    return out;
}

}  // namespace porkcast
