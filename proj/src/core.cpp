#include "porkcast/core.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace porkcast {

using namespace std::chrono;

MarketId::MarketId(std::string token, std::string name) : id(std::move(token)), display_name(std::move(name)) {
    if (id.empty()) {
        throw std::invalid_argument("market id must be non-empty");
    }
    if (display_name.empty()) {
        display_name = default_display_name(id);
    }
}

std::string default_display_name(std::string_view token) {
    static const std::map<std::string, std::string, std::less<>> names = {
        {"ES-BARCELONA", "Barcelona"}, {"ES-HUESCA", "Huesca"},         {"ES-ZARAGOZA", "Zaragoza"},
        {"ES-LLEIDA", "Lleida"},       {"ES-MURCIA", "Murcia"},         {"ES-PONTEVEDRA", "Pontevedra"},
        {"ES-SALAMANCA", "Salamanca"}, {"ES-SEGOVIA", "Segovia"},       {"ES-BINEFAR", "Binefar"},
    };
    if (auto it = names.find(token); it != names.end()) {
        return it->second;
    }
    return std::string(token);
}

namespace {

constexpr std::array<std::string_view, 7> kWeekdayNames = {"Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"};

sys_days iso_week1_monday(int year) {
    // ISO week 1 is the week containing January 4th.
    const sys_days jan4{std::chrono::year{year} / January / 4};
    const unsigned iso = weekday{jan4}.iso_encoding();  // Mon=1..Sun=7
    return jan4 - days{iso - 1};
}

}  // namespace

std::string_view to_string(Weekday d) { return kWeekdayNames.at(static_cast<std::size_t>(d)); }

Weekday weekday_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kWeekdayNames.size(); ++i) {
        if (kWeekdayNames[i] == s) {
            return static_cast<Weekday>(i);
        }
    }
    static const std::array<std::string_view, 7> long_names = {"Monday", "Tuesday",  "Wednesday", "Thursday",
                                                                "Friday", "Saturday", "Sunday"};
    for (std::size_t i = 0; i < long_names.size(); ++i) {
        if (long_names[i] == s) {
            return static_cast<Weekday>(i);
        }
    }
    throw std::invalid_argument("unknown weekday '" + std::string(s) + "'");
}

int iso_weeks_in_year(int year) {
    const weekday jan1{sys_days{std::chrono::year{year} / January / 1}};
    const bool leap = std::chrono::year{year}.is_leap();
    if (jan1 == Thursday || (leap && jan1 == Wednesday)) {
        return 53;
    }
    return 52;
}

IsoWeek::IsoWeek(int year, int week) : year_(year), week_(week) {
    if (year < kMinYear || year > kMaxYear) {
        throw std::invalid_argument("ISO year " + std::to_string(year) + " outside supported range 1990..2100");
    }
    if (week < 1 || week > iso_weeks_in_year(year)) {
        throw std::invalid_argument("week " + std::to_string(week) + " does not exist in ISO year " +
                                    std::to_string(year));
    }
}

IsoWeek IsoWeek::from_date(year_month_day date) {
    if (!date.ok()) {
        throw std::invalid_argument("invalid calendar date");
    }
    const sys_days day{date};
    int y = static_cast<int>(date.year());
    // The ISO year of a date is the year of its Thursday.
    const sys_days thursday = day - days{weekday{day}.iso_encoding() - 1} + days{3};
    y = static_cast<int>(year_month_day{thursday}.year());
    const auto week = (thursday - iso_week1_monday(y)).count() / 7 + 1;
    return IsoWeek(y, static_cast<int>(week));
}

IsoWeek IsoWeek::parse(std::string_view text) {
    int y = 0;
    int w = 0;
    if (text.size() < 7 || text[4] != '-' || (text[5] != 'W' && text[5] != 'w')) {
        throw std::invalid_argument("malformed ISO week '" + std::string(text) + "', expected YYYY-Www");
    }
    auto [p1, e1] = std::from_chars(text.data(), text.data() + 4, y);
    auto [p2, e2] = std::from_chars(text.data() + 6, text.data() + text.size(), w);
    if (e1 != std::errc{} || e2 != std::errc{} || p1 != text.data() + 4 || p2 != text.data() + text.size()) {
        throw std::invalid_argument("malformed ISO week '" + std::string(text) + "', expected YYYY-Www");
    }
    return IsoWeek(y, w);
}

sys_days IsoWeek::monday() const { return iso_week1_monday(year_) + weeks{week_ - 1}; }

year_month_day IsoWeek::date_of(Weekday d) const { return year_month_day{monday() + days{static_cast<int>(d)}}; }

std::string IsoWeek::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-W%02d", year_, week_);
    return buf;
}

IsoWeek week_add(IsoWeek w, long delta) {
    // Keep the arithmetic in day counts; clamp check before constructing.
    const sys_days target = w.monday() + weeks{delta};
    const sys_days thursday = target + days{3};
    const int y = static_cast<int>(year_month_day{thursday}.year());
    if (y < IsoWeek::kMinYear || y > IsoWeek::kMaxYear) {
        throw std::out_of_range("week_add(" + w.to_string() + ", " + std::to_string(delta) +
                                ") leaves the supported range 1990..2100");
    }
    return IsoWeek::from_date(year_month_day{target});
}

long weeks_between(IsoWeek a, IsoWeek b) { return (b.monday() - a.monday()).count() / 7; }

Price Price::parse(std::string_view text) {
    auto fail = [&]() -> Price { throw std::invalid_argument("non-numeric price '" + std::string(text) + "'"); };
    if (text.empty()) {
        return fail();
    }
    std::size_t i = 0;
    bool negative = false;
    if (text[0] == '-' || text[0] == '+') {
        negative = text[0] == '-';
        ++i;
    }
    std::int64_t integral = 0;
    std::size_t digits = 0;
    for (; i < text.size() && text[i] >= '0' && text[i] <= '9'; ++i, ++digits) {
        integral = integral * 10 + (text[i] - '0');
        if (integral > 100'000'000'000LL) {
            return fail();
        }
    }
    std::int64_t frac = 0;
    int frac_digits = 0;
    bool round_up = false;
    if (i < text.size() && text[i] == '.') {
        ++i;
        for (; i < text.size() && text[i] >= '0' && text[i] <= '9'; ++i, ++digits) {
            if (frac_digits < 4) {
                frac = frac * 10 + (text[i] - '0');
                ++frac_digits;
            } else if (frac_digits == 4) {
                round_up = text[i] >= '5';
                ++frac_digits;
            }
        }
    }
    if (i != text.size() || digits == 0) {
        return fail();
    }
    while (frac_digits < 4) {
        frac *= 10;
        ++frac_digits;
    }
    std::int64_t units = integral * 10000 + frac + (round_up ? 1 : 0);
    return from_units(negative ? -units : units);
}

Price Price::from_double(double value) {
    if (!std::isfinite(value)) {
        throw std::invalid_argument("non-finite price");
    }
    return from_units(static_cast<std::int64_t>(std::llround(value * 10000.0)));
}

std::string Price::to_string() const {
    const std::int64_t a = units_ < 0 ? -units_ : units_;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%lld.%04lld", units_ < 0 ? "-" : "", static_cast<long long>(a / 10000),
                  static_cast<long long>(a % 10000));
    return buf;
}

std::vector<double> MarketSeries::values() const {
    std::vector<double> out;
    out.reserve(observations.size());
    for (const auto& o : observations) {
        out.push_back(o.price.value());
    }
    return out;
}

std::string_view to_string(ViolationKind k) {
    switch (k) {
        case ViolationKind::NonPositivePrice: return "non-positive price";
        case ViolationKind::OutOfOrderWeek: return "out-of-order week";
        case ViolationKind::DuplicateWeek: return "duplicate week";
        case ViolationKind::ForeignMarket: return "foreign market";
    }
    return "unknown";
}

ValidationReport validate_series(const MarketSeries& series) {
    ValidationReport report;
    auto add = [&](ViolationKind kind, std::size_t i, const PriceObservation& o) {
        report.violations.push_back(
            {kind, i, o.week, std::string(to_string(kind)) + " at " + o.week.to_string() + " (index " +
                                  std::to_string(i) + ")"});
    };
    const auto& obs = series.observations;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (obs[i].market != series.market) {
            add(ViolationKind::ForeignMarket, i, obs[i]);
        }
        if (obs[i].price.units() <= 0) {
            add(ViolationKind::NonPositivePrice, i, obs[i]);
        }
        if (i > 0) {
            if (obs[i].week == obs[i - 1].week) {
                add(ViolationKind::DuplicateWeek, i, obs[i]);
            } else if (obs[i].week < obs[i - 1].week) {
                add(ViolationKind::OutOfOrderWeek, i, obs[i]);
            }
        }
    }
    return report;
}

PublicationCalendar PublicationCalendar::spanish_default() {
    return PublicationCalendar({
        {"ES-SALAMANCA", Weekday::Mon},
        {"ES-ZARAGOZA", Weekday::Mon},
        {"ES-PONTEVEDRA", Weekday::Tue},
        {"ES-HUESCA", Weekday::Wed},
        {"ES-MURCIA", Weekday::Thu},
        {"ES-SEGOVIA", Weekday::Thu},
        {"ES-LLEIDA", Weekday::Thu},
        {"ES-BARCELONA", Weekday::Thu},
    });
}

bool PublicationCalendar::contains(std::string_view market) const {
    return days_.find(std::string(market)) != days_.end();
}

Weekday PublicationCalendar::weekday_of(std::string_view market) const {
    auto it = days_.find(std::string(market));
    if (it == days_.end()) {
        throw std::out_of_range("market '" + std::string(market) + "' missing from publication calendar");
    }
    return it->second;
}

LagScenario LagScenario::public_delayed(int delay_weeks) {
    if (delay_weeks < 1) {
        throw std::invalid_argument("public delay must be at least one week");
    }
    return {Kind::PublicDelayed, delay_weeks};
}

std::string LagScenario::name() const {
    if (kind == Kind::SubscriptionSameWeek) {
        return "subscription";
    }
    return delay_weeks == 2 ? "public" : "public-" + std::to_string(delay_weeks);
}

LagScenario LagScenario::parse(std::string_view text) {
    if (text == "subscription") {
        return subscription();
    }
    if (text == "public") {
        return public_delayed(2);
    }
    if (text.starts_with("public-")) {
        int d = 0;
        auto rest = text.substr(7);
        auto [p, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), d);
        if (ec == std::errc{} && p == rest.data() + rest.size()) {
            return public_delayed(d);
        }
    }
    throw std::invalid_argument("unknown scenario '" + std::string(text) + "'");
}

}  // namespace porkcast
