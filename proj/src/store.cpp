#include "porkcast/store.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace porkcast {

std::string direction_of(double predicted, double last_observed) {
    const double delta = predicted - last_observed;
    if (std::abs(delta) < 0.0005) return "flat";
    return delta > 0.0 ? "up" : "down";
}

nlohmann::json ForecastRecord::to_json() const {
    return {{"target", target},
            {"week", week.to_string()},
            {"predicted_price", predicted_price},
            {"last_observed", last_observed},
            {"direction", direction},
            {"model_fingerprint", model_fingerprint},
            {"created_at", created_at},
            {"stale", stale},
            {"forward_filled", forward_filled},
            {"data_through", data_through}};
}

ForecastRecord ForecastRecord::from_json(const nlohmann::json& j) {
    ForecastRecord f;
    f.target = j.at("target");
    f.week = IsoWeek::parse(j.at("week").get<std::string>());
    f.predicted_price = j.at("predicted_price");
    f.last_observed = j.at("last_observed");
    f.direction = j.at("direction");
    f.model_fingerprint = j.value("model_fingerprint", "");
    f.created_at = j.value("created_at", "");
    f.stale = j.value("stale", false);
    f.forward_filled = j.value("forward_filled", std::size_t{0});
    f.data_through = j.value("data_through", "");
    return f;
}

nlohmann::json SettlementRecord::to_json() const {
    return {{"week", week.to_string()},
            {"agreed_price", agreed_price},
            {"entered_by", entered_by},
            {"entered_at", entered_at}};
}

SettlementRecord SettlementRecord::from_json(const nlohmann::json& j) {
    SettlementRecord s;
    s.week = IsoWeek::parse(j.at("week").get<std::string>());
    s.agreed_price = j.at("agreed_price");
    s.entered_by = j.value("entered_by", "");
    s.entered_at = j.value("entered_at", "");
    return s;
}

nlohmann::json Snapshot::to_json() const {
    nlohmann::json series_j = nlohmann::json::object();
    for (const auto& [market, points] : series) {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& [week, obs] : points) {
            pts.push_back({{"week", week.to_string()},
                           {"price", obs.price.to_string()},
                           {"weekday", std::string(porkcast::to_string(obs.weekday))},
                           {"source", obs.source}});
        }
        series_j[market] = std::move(pts);
    }
    nlohmann::json active = nlohmann::json::array();
    for (const auto& [week, f] : forecasts) active.push_back(f.to_json());
    nlohmann::json history = nlohmann::json::array();
    for (const auto& f : forecast_history) history.push_back(f.to_json());
    nlohmann::json settled = nlohmann::json::array();
    for (const auto& [week, s] : settlements) settled.push_back(s.to_json());
    nlohmann::json settled_history = nlohmann::json::array();
    for (const auto& s : settlement_history) settled_history.push_back(s.to_json());
    return {{"events", events},
            {"last_observation_seq", last_observation_seq},
            {"last_forecast_seq", last_forecast_seq},
            {"series", std::move(series_j)},
            {"forecasts", std::move(active)},
            {"forecast_history", std::move(history)},
            {"settlements", std::move(settled)},
            {"settlement_history", std::move(settled_history)},
            {"repairs", repairs},
            {"alerts", alerts},
            {"champion", champion ? *champion : nlohmann::json(nullptr)},
            {"report", report ? *report : nlohmann::json(nullptr)},
            {"last_cycle", last_cycle ? *last_cycle : nlohmann::json(nullptr)}};
}

void apply_event(Snapshot& s, const nlohmann::json& event) {
    if (!event.is_object()) throw std::invalid_argument("event is not an object");
    const auto seq = event.at("seq").get<std::size_t>();
    if (seq != s.events + 1) {
        throw std::invalid_argument("event sequence " + std::to_string(seq) + " follows " + std::to_string(s.events));
    }
    const std::string type = event.at("type");
    const auto& d = event.at("data");
    if (type == "observation") {
        StoredObservation obs{Price::parse(d.at("price").get<std::string>()),
                              weekday_from_string(d.at("weekday").get<std::string>()), d.value("source", "fetch")};
        s.series[d.at("market").get<std::string>()][IsoWeek::parse(d.at("week").get<std::string>())] = obs;
        s.last_observation_seq = seq;
    } else if (type == "repair") {
        s.repairs.push_back(d);
    } else if (type == "forecast") {
        ForecastRecord f = ForecastRecord::from_json(d);
        s.forecasts[f.week] = f;
        s.forecast_history.push_back(std::move(f));
        s.last_forecast_seq = seq;
    } else if (type == "settlement") {
        SettlementRecord r = SettlementRecord::from_json(d);
        s.settlements[r.week] = r;
        s.settlement_history.push_back(std::move(r));
    } else if (type == "model") {
        s.champion = d;
    } else if (type == "report") {
        s.report = d;
    } else if (type == "cycle") {
        s.last_cycle = d;
    } else if (type == "alert") {
        s.alerts.push_back(d);
    } else {
        throw std::invalid_argument("unknown event type '" + type + "'");
    }
    s.events = seq;
}

ReplayResult replay_store(std::string_view log) {
    ReplayResult r;
    std::size_t pos = 0;
    while (pos < log.size()) {
        const std::size_t nl = log.find('\n', pos);
        const bool complete = nl != std::string_view::npos;
        const std::size_t end = complete ? nl : log.size();
        const std::string_view line = log.substr(pos, end - pos);
        const std::size_t next = complete ? nl + 1 : log.size();
        if (line.empty()) {
            pos = next;
            r.valid_bytes = pos;
            continue;
        }
        std::string error;
        if (!complete) {
            error = "incomplete line";
        } else {
            try {
                apply_event(r.snapshot, nlohmann::json::parse(line));
            } catch (const std::exception& e) {
                error = e.what();
            }
        }
        if (!error.empty()) {
            const bool last = next >= log.size() || log.find_first_not_of("\r\n\t ", next) == std::string_view::npos;
            r.warnings.push_back("bad event at byte offset " + std::to_string(pos) + ": " + error);
            if (last) {
                r.truncated_tail = true;
            } else {
                r.corrupt = true;
            }
            return r;
        }
        pos = next;
        r.valid_bytes = pos;
    }
    return r;
}

Store::Store(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
    std::string text;
    if (std::filesystem::exists(log_path())) {
        std::ifstream in(log_path(), std::ios::binary);
        if (!in) throw StoreError("cannot read " + log_path().string());
        std::stringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    ReplayResult r = replay_store(text);
    warnings_ = r.warnings;
    if (r.corrupt) {
        throw StoreError("corrupt event log " + log_path().string() + ": " + r.warnings.front());
    }
    if (r.truncated_tail) {
        std::filesystem::resize_file(log_path(), r.valid_bytes);
        warnings_.push_back("dropped the incomplete final event; the log now ends at byte " +
                            std::to_string(r.valid_bytes));
    }
    state_ = std::move(r.snapshot);

    if (std::filesystem::exists(snapshot_path())) {
        std::ifstream in(snapshot_path());
        std::stringstream ss;
        ss << in.rdbuf();
        nlohmann::json saved;
        try {
            saved = nlohmann::json::parse(ss.str());
        } catch (const std::exception&) {
            saved = nullptr;
        }
        const std::size_t saved_events = saved.is_object() ? saved.value("events", std::size_t{0}) : 0;
        if (saved_events > state_.events) {
            throw StoreError("snapshot is ahead of the event log (" + std::to_string(saved_events) + " vs " +
                             std::to_string(state_.events) + " events)");
        }
        if (saved_events == state_.events && saved != state_.to_json()) {
            throw StoreError("replay divergence: the event log does not reproduce " + snapshot_path().string());
        }
        if (saved_events < state_.events || !saved.is_object()) {
            warnings_.push_back("snapshot was behind the event log and has been rebuilt");
        }
    }
    write_snapshot();
}

void Store::append(const std::string& type, nlohmann::json data) {
    std::vector<std::pair<std::string, nlohmann::json>> one;
    one.emplace_back(type, std::move(data));
    append_all(std::move(one));
}

void Store::append_all(std::vector<std::pair<std::string, nlohmann::json>> events) {
    if (events.empty()) return;
    Snapshot next = state_;
    std::string lines;
    for (auto& [type, data] : events) {
        nlohmann::json event = {{"seq", next.events + 1}, {"type", type}, {"data", std::move(data)}};
        apply_event(next, event);
        lines += event.dump();
        lines += '\n';
    }
    {
        std::ofstream out(log_path(), std::ios::app | std::ios::binary);
        if (!out) throw StoreError("cannot append to " + log_path().string());
        out << lines;
        out.flush();
        if (!out) throw StoreError("write failed on " + log_path().string());
    }
    state_ = std::move(next);
    write_snapshot();
}

void Store::write_snapshot() const {
    const auto tmp = snapshot_path().string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw StoreError("cannot write " + tmp);
        out << state_.to_json().dump(1) << '\n';
    }
    std::filesystem::rename(tmp, snapshot_path());
}

}  // namespace porkcast
