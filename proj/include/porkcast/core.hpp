#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <chrono>

namespace porkcast {

/// Market identifier token (e.g. "ES-LLEIDA"). Equality and ordering use the token only.
struct MarketId {
    std::string id;
    std::string display_name;

    MarketId() = default;
    explicit MarketId(std::string token, std::string name = {});

    friend bool operator==(const MarketId& a, const MarketId& b) { return a.id == b.id; }
    friend auto operator<=>(const MarketId& a, const MarketId& b) { return a.id <=> b.id; }
};

/// Human-readable name for the known Spanish markets; falls back to the token.
std::string default_display_name(std::string_view token);

enum class Weekday : std::uint8_t { Mon = 0, Tue, Wed, Thu, Fri, Sat, Sun };

std::string_view to_string(Weekday d);
Weekday weekday_from_string(std::string_view s);

/**
 * ISO-8601 week (year, week 1..53). Supported years are 1990..2100.
 *
 * Weeks are totally ordered by (year, week); arithmetic goes through the
 * Monday of the week, so year boundaries with 52 or 53 weeks are handled
 * by the calendar rather than by hand.
 */
class IsoWeek {
public:
    static constexpr int kMinYear = 1990;
    static constexpr int kMaxYear = 2100;

    IsoWeek() = default;
    /// Throws std::invalid_argument if (year, week) is not a real ISO week in range.
    IsoWeek(int year, int week);

    static IsoWeek from_date(std::chrono::year_month_day date);
    /// Parses "YYYY-Www" (e.g. "2020-W09").
    static IsoWeek parse(std::string_view text);

    int year() const { return year_; }
    int week() const { return week_; }

    std::chrono::sys_days monday() const;
    std::chrono::year_month_day date_of(Weekday d) const;

    /// "YYYY-Www"
    std::string to_string() const;

    friend bool operator==(const IsoWeek&, const IsoWeek&) = default;
    friend auto operator<=>(const IsoWeek&, const IsoWeek&) = default;

private:
    int year_ = 2016;
    int week_ = 1;
};

int iso_weeks_in_year(int year);

/// w shifted by delta weeks. Throws std::out_of_range outside 1990..2100.
IsoWeek week_add(IsoWeek w, long delta);
/// Signed number of weeks from a to b (b - a).
long weeks_between(IsoWeek a, IsoWeek b);

/**
 * Price in EUR/kg with a fixed 4-decimal representation.
 *
 * Stored as an integer count of 1e-4 EUR so that parsing and re-emitting
 * an ingestion file never goes through binary floating point.
 */
class Price {
public:
    constexpr Price() = default;
    static constexpr Price from_units(std::int64_t ten_thousandths) {
        Price p;
        p.units_ = ten_thousandths;
        return p;
    }
    /// Parses a decimal with '.' separator. Digits past the 4th decimal are rounded half away from zero.
    static Price parse(std::string_view text);
    /// Rounds half away from zero to 4 decimals.
    static Price from_double(double value);

    constexpr std::int64_t units() const { return units_; }
    constexpr double value() const { return static_cast<double>(units_) / 10000.0; }
    /// Always 4 decimals, e.g. "1.0810".
    std::string to_string() const;

    friend constexpr bool operator==(const Price&, const Price&) = default;
    friend constexpr auto operator<=>(const Price&, const Price&) = default;

private:
    std::int64_t units_ = 0;
};

struct PriceObservation {
    MarketId market;
    IsoWeek week;
    Price price;
    Weekday decision_weekday = Weekday::Mon;
};

struct MarketSeries {
    MarketId market;
    std::vector<PriceObservation> observations;

    std::vector<double> values() const;
};

enum class ViolationKind { NonPositivePrice, OutOfOrderWeek, DuplicateWeek, ForeignMarket };

std::string_view to_string(ViolationKind k);

struct Violation {
    ViolationKind kind;
    std::size_t index = 0;  // position in observations
    IsoWeek week;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

/// Reports every invariant violation of the series. Never throws for bad data.
ValidationReport validate_series(const MarketSeries& series);

/**
 * Weekday on which each market sets its price.
 *
 * The default is the Spanish regional calendar. Barcelona is not part of the
 * published list and is placed on Thursday, which is the most conservative
 * choice for same-week availability.
 */
class PublicationCalendar {
public:
    PublicationCalendar() = default;
    explicit PublicationCalendar(std::map<std::string, Weekday> days) : days_(std::move(days)) {}

    static PublicationCalendar spanish_default();

    bool contains(std::string_view market) const;
    /// Throws std::out_of_range naming the market when absent.
    Weekday weekday_of(std::string_view market) const;
    void set(std::string market, Weekday day) { days_[std::move(market)] = day; }
    const std::map<std::string, Weekday>& entries() const { return days_; }

private:
    std::map<std::string, Weekday> days_;
};

/// Availability model for feature construction.
struct LagScenario {
    enum class Kind { PublicDelayed, SubscriptionSameWeek };

    Kind kind = Kind::PublicDelayed;
    int delay_weeks = 2;  // PublicDelayed only

    static LagScenario public_delayed(int delay_weeks = 2);
    static LagScenario subscription() { return {Kind::SubscriptionSameWeek, 0}; }

    /// "public" / "subscription"; non-default delays render as "public-<d>".
    std::string name() const;
    /// Accepts "public", "public-<d>", "subscription".
    static LagScenario parse(std::string_view text);

    friend bool operator==(const LagScenario&, const LagScenario&) = default;
};

}  // namespace porkcast
