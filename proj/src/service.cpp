#include "porkcast/service.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

#include "porkcast/errors.hpp"
#include "porkcast/models.hpp"
#include "porkcast/windowing.hpp"

namespace porkcast {

namespace {

IsoWeek week_of(std::chrono::system_clock::time_point t) {
    return IsoWeek::from_date(std::chrono::year_month_day(std::chrono::floor<std::chrono::days>(t)));
}

std::string repair_key(const std::string& market, const std::string& week, const std::string& original,
                       const std::string& replaced) {
    return market + '|' + week + '|' + original + '|' + replaced;
}

nlohmann::json observation_event(const std::string& market, const IsoWeek& week, Price price, Weekday day,
                                 const std::string& source) {
    return {{"market", market},
            {"week", week.to_string()},
            {"price", price.to_string()},
            {"weekday", std::string(to_string(day))},
            {"source", source}};
}

/// Layout-only dataset for feature_row().
SupervisedDataset layout_of(const TrainedModel& model) {
    SupervisedDataset ds;
    ds.window = model.window;
    ds.target = model.target;
    ds.markets = model.markets;
    ds.offsets = model.offsets;
    ds.scenario = model.scenario;
    return ds;
}

ForecastRecord make_forecast(const TrainedModel& model, const PricePanel& panel, const IsoWeek& week,
                             const std::string& created_at) {
    const FeatureRow row = feature_row(panel, layout_of(model), week);
    const Eigen::MatrixXd x = row.values;
    const double predicted = predict_tabular(model, x)(0);
    if (!std::isfinite(predicted)) throw FitError("champion produced a non-finite forecast");
    ForecastRecord f;
    f.target = model.target;
    f.week = week;
    f.predicted_price = predicted;
    f.last_observed = panel.values(static_cast<Eigen::Index>(panel.rows()) - 1,
                                   static_cast<Eigen::Index>(panel.column_of(model.target)));
    f.direction = direction_of(f.predicted_price, f.last_observed);
    f.model_fingerprint = model.fingerprint();
    f.created_at = created_at;
    f.forward_filled = row.forward_filled;
    f.data_through = panel.weeks.back().to_string();
    return f;
}

}  // namespace

std::string format_timestamp(std::chrono::system_clock::time_point t) {
    const auto day = std::chrono::floor<std::chrono::days>(t);
    const std::chrono::year_month_day ymd(day);
    const std::chrono::hh_mm_ss hms(std::chrono::floor<std::chrono::seconds>(t - day));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

nlohmann::json CycleSummary::to_json() const {
    return {{"status", status},
            {"message", message},
            {"week", week.to_string()},
            {"new_observations", new_observations},
            {"changed_observations", changed_observations},
            {"repairs", repairs},
            {"stale", stale},
            {"errors", errors},
            {"forecast", forecast ? forecast->to_json() : nlohmann::json(nullptr)}};
}

nlohmann::json WhatIfResult::to_json() const {
    nlohmann::json j = forecast.to_json();
    j["overrides_applied"] = overrides_applied;
    j["baseline"] = baseline ? baseline->to_json() : nlohmann::json(nullptr);
    return j;
}

StoredPanel panel_from_snapshot(const Snapshot& snapshot, double outlier_threshold) {
    StoredPanel out;
    std::vector<MarketSeries> series;
    for (const auto& [market, points] : snapshot.series) {
        MarketSeries s;
        s.market = MarketId(market);
        for (const auto& [week, obs] : points) s.observations.push_back({s.market, week, obs.price, obs.weekday});
        if (s.observations.size() >= 3) {
            RepairResult r = repair_outliers(s, outlier_threshold);
            out.repairs.insert(out.repairs.end(), r.log.begin(), r.log.end());
            s = std::move(r.series);
        }
        series.push_back(std::move(s));
    }
    if (series.empty()) throw DataError("the store holds no observations yet");
    out.panel = align_panel(series).panel;
    return out;
}

Service::Service(ServiceConfig config, Clock clock) : config_(std::move(config)), clock_(std::move(clock)) {
    if (!clock_) clock_ = [] { return std::chrono::system_clock::now(); };
    store_ = std::make_unique<Store>(config_.data_dir);
    warnings_ = store_->warnings();
    publish(store_->state());
}

Service::~Service() { stop_scheduler(); }

std::shared_ptr<const Snapshot> Service::snapshot() const {
    std::lock_guard lock(snapshot_mu_);
    return current_;
}

void Service::publish(const Snapshot& s) {
    auto next = std::make_shared<const Snapshot>(s);
    std::lock_guard lock(snapshot_mu_);
    current_ = std::move(next);
}

PricePanel Service::panel() const { return panel_from_snapshot(*snapshot(), config_.outlier_threshold).panel; }

CycleSummary Service::run_weekly_cycle() {
    std::lock_guard writer(writer_);
    const auto started = now();
    const std::string stamp = format_timestamp(started);
    CycleSummary summary;
    summary.week = week_of(started);

    // Fetch every source; a failing source leaves the stored data in place.
    std::vector<MarketSeries> fetched;
    for (const auto& source : config_.sources) {
        try {
            auto parsed = parse_price_csv(fetch_source(source));
            for (auto& s : parsed) fetched.push_back(std::move(s));
        } catch (const std::exception& e) {
            summary.stale = true;
            summary.errors.push_back(source.url + ": " + e.what());
        }
    }

    std::vector<std::pair<std::string, nlohmann::json>> events;
    const Snapshot& before = store_->state();
    for (const auto& s : fetched) {
        const auto known = before.series.find(s.market.id);
        for (const auto& obs : s.observations) {
            const StoredObservation* prior = nullptr;
            if (known != before.series.end()) {
                const auto it = known->second.find(obs.week);
                if (it != known->second.end()) prior = &it->second;
            }
            if (prior && (prior->source == "settlement" || prior->price == obs.price)) continue;
            (prior ? summary.changed_observations : summary.new_observations)++;
            events.emplace_back("observation",
                                observation_event(s.market.id, obs.week, obs.price, obs.decision_weekday, "fetch"));
        }
    }
    store_->append_all(std::move(events));

    auto finish = [&](const std::string& status, const std::string& message) {
        summary.status = status;
        summary.message = message;
        nlohmann::json cycle = summary.to_json();
        cycle["at"] = stamp;
        store_->append("cycle", cycle);
        publish(store_->state());
        return summary;
    };
    auto alert = [&](const std::string& message) {
        store_->append("alert", {{"at", stamp}, {"message", message}});
    };

    StoredPanel built;
    try {
        built = panel_from_snapshot(store_->state(), config_.outlier_threshold);
        if (!built.panel.has_market(config_.target_market)) {
            throw DataError("target market " + config_.target_market + " has no stored observations");
        }
    } catch (const std::exception& e) {
        alert(std::string("cannot build the price panel: ") + e.what());
        return finish("failed", e.what());
    }

    std::set<std::string> logged;
    for (const auto& r : store_->state().repairs) {
        logged.insert(repair_key(r.value("market", ""), r.value("week", ""), r.value("original", ""),
                                 r.value("replaced", "")));
    }
    std::vector<std::pair<std::string, nlohmann::json>> repairs;
    for (const auto& r : built.repairs) {
        const std::string key = repair_key(r.market.id, r.week.to_string(), r.original_value.to_string(),
                                           r.replaced_value.to_string());
        if (!logged.insert(key).second) continue;
        repairs.emplace_back("repair", nlohmann::json{{"market", r.market.id},
                                                      {"week", r.week.to_string()},
                                                      {"original", r.original_value.to_string()},
                                                      {"replaced", r.replaced_value.to_string()},
                                                      {"rule", r.rule}});
    }
    summary.repairs = repairs.size();
    store_->append_all(std::move(repairs));

    const PricePanel& panel = built.panel;
    const IsoWeek next_week = week_add(panel.weeks.back(), 1);
    const Snapshot& state = store_->state();
    if (summary.new_observations + summary.changed_observations == 0 && state.forecasts.count(next_week) &&
        state.last_observation_seq < state.last_forecast_seq) {
        summary.forecast = state.forecasts.at(next_week);
        return finish("no-op", "no-op: 0 new observations");
    }

    TrainedModel champion;
    try {
        const int window = static_cast<int>(param_int(config_.champion.params, "window"));
        const SupervisedDataset ds =
            build_dataset(panel, MarketId(config_.target_market), window, config_.scenario, config_.calendar);
        champion = fit_tabular(config_.champion.family, ds, config_.champion.params, config_.champion.seed);
        ForecastRecord f = make_forecast(champion, panel, next_week, stamp);
        f.stale = summary.stale;
        const bool same_model = state.champion && state.champion->value("fingerprint", "") == f.model_fingerprint;
        if (!same_model) {
            nlohmann::json model = to_json(champion);
            store_->append("model", {{"fingerprint", f.model_fingerprint}, {"trained_at", stamp}, {"model", model}});
        }
        store_->append("forecast", f.to_json());
        summary.forecast = f;
    } catch (const std::exception& e) {
        alert(std::string("training failed, forecast withheld: ") + e.what());
        return finish("failed", std::string("training failed: ") + e.what());
    }
    std::string message = std::to_string(summary.new_observations) + " new observations, forecast for " +
                           next_week.to_string();
    if (summary.stale) message += " (stale data)";
    return finish("ok", message);
}

SettlementRecord Service::record_settlement(const IsoWeek& week, double agreed_price, const std::string& entered_by) {
    if (!std::isfinite(agreed_price) || !(agreed_price > 0.0)) {
        throw std::invalid_argument("agreed_price must be positive");
    }
    std::lock_guard writer(writer_);
    const Snapshot& s = store_->state();
    IsoWeek limit = week_of(now());
    if (!s.forecasts.empty()) limit = std::max(limit, s.forecasts.rbegin()->first);
    if (week > limit) {
        throw std::invalid_argument("week " + week.to_string() + " lies beyond the current forecast week " +
                                    limit.to_string());
    }
    SettlementRecord r;
    r.week = week;
    r.agreed_price = Price::from_double(agreed_price).value();
    r.entered_by = entered_by;
    r.entered_at = format_timestamp(now());
    const Weekday day =
        config_.calendar.contains(config_.target_market) ? config_.calendar.weekday_of(config_.target_market) : Weekday::Thu;
    std::vector<std::pair<std::string, nlohmann::json>> events;
    events.emplace_back("settlement", r.to_json());
    events.emplace_back("observation", observation_event(config_.target_market, week, Price::from_double(agreed_price),
                                                         day, "settlement"));
    store_->append_all(std::move(events));
    publish(store_->state());
    return r;
}

WhatIfResult Service::what_if(const std::vector<PriceOverride>& overrides) const {
    const auto snap = snapshot();
    if (!snap->champion) throw ConflictError("no champion model yet; run a cycle first");
    const TrainedModel model = trained_model_from_json(snap->champion->at("model"));
    PricePanel panel = panel_from_snapshot(*snap, config_.outlier_threshold).panel;
    const IsoWeek next_week = week_add(panel.weeks.back(), 1);

    for (const auto& o : overrides) {
        if (!panel.has_market(o.market)) throw std::invalid_argument("unknown market '" + o.market + "'");
        if (!std::isfinite(o.price) || !(o.price > 0.0)) {
            throw std::invalid_argument("override price for " + o.market + " must be positive");
        }
        if (o.week < panel.weeks.front() || o.week > next_week) {
            throw std::invalid_argument("override week " + o.week.to_string() + " lies outside " +
                                        panel.weeks.front().to_string() + ".." + next_week.to_string());
        }
    }
    WhatIfResult result;
    const bool extend = std::any_of(overrides.begin(), overrides.end(),
                                    [&](const PriceOverride& o) { return o.week == next_week; });
    const Eigen::Index last = static_cast<Eigen::Index>(panel.rows()) - 1;
    const double last_target = panel.values(last, static_cast<Eigen::Index>(panel.column_of(model.target)));
    if (extend) {
        panel.values.conservativeResize(panel.values.rows() + 1, Eigen::NoChange);
        panel.values.row(last + 1) = panel.values.row(last);
        panel.fill_flags.conservativeResize(panel.fill_flags.rows() + 1, Eigen::NoChange);
        panel.fill_flags.row(last + 1).setConstant(true);
        panel.weeks.push_back(next_week);
    }
    for (const auto& o : overrides) {
        const auto row = static_cast<Eigen::Index>(weeks_between(panel.weeks.front(), o.week));
        panel.values(row, static_cast<Eigen::Index>(panel.column_of(o.market))) = o.price;
        ++result.overrides_applied;
    }
    result.forecast = make_forecast(model, panel, next_week, format_timestamp(now()));
    if (extend) {
        // The forecast week's own row is hypothetical: report against the last real observation.
        result.forecast.last_observed = last_target;
        result.forecast.direction = direction_of(result.forecast.predicted_price, last_target);
        result.forecast.data_through = week_add(next_week, -1).to_string();
    }
    const auto active = snap->forecasts.find(next_week);
    if (active != snap->forecasts.end()) result.baseline = active->second;
    return result;
}

void Service::publish_report(const nlohmann::json& report) {
    std::lock_guard writer(writer_);
    store_->append("report", report);
    publish(store_->state());
}

bool Service::cycle_due(std::chrono::system_clock::time_point t) const {
    const auto day = std::chrono::floor<std::chrono::days>(t);
    const unsigned iso = std::chrono::weekday(day).iso_encoding();  // Monday = 1
    const int hour = static_cast<int>(std::chrono::floor<std::chrono::hours>(t - day).count());
    const int configured = static_cast<int>(config_.cycle_weekday) + 1;
    if (static_cast<int>(iso) < configured || (static_cast<int>(iso) == configured && hour < config_.cycle_hour)) {
        return false;
    }
    const auto snap = snapshot();
    if (!snap->last_cycle) return true;
    const IsoWeek last = IsoWeek::parse(snap->last_cycle->value("week", std::string("1990-W01")));
    return last < week_of(t);
}

void Service::start_scheduler(std::chrono::milliseconds tick) {
    if (scheduler_.joinable()) return;
    {
        std::lock_guard lock(scheduler_mu_);
        stopping_ = false;
    }
    scheduler_ = std::thread([this, tick] {
        std::unique_lock lock(scheduler_mu_);
        while (!stopping_) {
            lock.unlock();
            try {
                if (cycle_due(now())) run_weekly_cycle();
            } catch (const std::exception&) {
                // run_weekly_cycle logs its own failures; a store error here must not kill the thread.
            }
            lock.lock();
            scheduler_cv_.wait_for(lock, tick, [this] { return stopping_; });
        }
    });
}

void Service::stop_scheduler() {
    {
        std::lock_guard lock(scheduler_mu_);
        stopping_ = true;
    }
    scheduler_cv_.notify_all();
    if (scheduler_.joinable()) scheduler_.join();
}

}  // namespace porkcast
