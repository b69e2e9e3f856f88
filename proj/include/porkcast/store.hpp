#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "porkcast/core.hpp"

namespace porkcast {

/// Store file is unreadable or its replay disagrees with the saved snapshot.
class StoreError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// "up", "down" or "flat" (|predicted - last| < 0.0005 EUR).
std::string direction_of(double predicted, double last_observed);

struct ForecastRecord {
    std::string target;
    IsoWeek week;
    double predicted_price = 0.0;
    double last_observed = 0.0;
    std::string direction;
    std::string model_fingerprint;
    std::string created_at;
    bool stale = false;
    std::size_t forward_filled = 0;  // feature cells reusing the last known week
    std::string data_through;        // last panel week

    nlohmann::json to_json() const;
    static ForecastRecord from_json(const nlohmann::json& j);
};

struct SettlementRecord {
    IsoWeek week;
    double agreed_price = 0.0;
    std::string entered_by;
    std::string entered_at;

    nlohmann::json to_json() const;
    static SettlementRecord from_json(const nlohmann::json& j);
};

struct StoredObservation {
    Price price;
    Weekday weekday = Weekday::Mon;
    std::string source;  // "fetch" or "settlement"
};

/// Current state derived from the event log.
struct Snapshot {
    std::map<std::string, std::map<IsoWeek, StoredObservation>> series;
    std::map<IsoWeek, ForecastRecord> forecasts;  // active forecast per week
    std::vector<ForecastRecord> forecast_history;  // every forecast event, oldest first
    std::map<IsoWeek, SettlementRecord> settlements;
    std::vector<SettlementRecord> settlement_history;
    std::vector<nlohmann::json> repairs;
    std::vector<nlohmann::json> alerts;
    std::optional<nlohmann::json> champion;  // serialized TrainedModel
    std::optional<nlohmann::json> report;
    std::optional<nlohmann::json> last_cycle;
    std::size_t events = 0;
    std::size_t last_observation_seq = 0;
    std::size_t last_forecast_seq = 0;

    /// Deterministic JSON; replay equality is checked on its dump.
    nlohmann::json to_json() const;
};

/// Folds one event {seq, type, data} into the snapshot. Throws std::invalid_argument for malformed events.
void apply_event(Snapshot& snapshot, const nlohmann::json& event);

struct ReplayResult {
    Snapshot snapshot;
    std::vector<std::string> warnings;
    std::size_t valid_bytes = 0;  // length of the replayed prefix
    bool truncated_tail = false;  // last line incomplete or unparsable
    bool corrupt = false;         // a bad line followed by more data
};

/// Replays NDJSON text. A bad final line is dropped with a warning naming its byte offset.
ReplayResult replay_store(std::string_view log);

/**
 * Append-only event log (events.ndjson) plus a snapshot file (snapshot.json)
 * in one directory. Opening replays the log, drops a partial final line,
 * and throws StoreError when a middle line is corrupt or the replay differs
 * from the saved snapshot. Not thread-safe: callers serialize writers.
 */
class Store {
public:
    explicit Store(std::filesystem::path dir);

    const Snapshot& state() const { return state_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    const std::filesystem::path& dir() const { return dir_; }

    /// Appends and applies one event, then rewrites the snapshot file.
    void append(const std::string& type, nlohmann::json data);
    /// Appends several events with one snapshot rewrite. Nothing is written if any event is malformed.
    void append_all(std::vector<std::pair<std::string, nlohmann::json>> events);

    std::filesystem::path log_path() const { return dir_ / "events.ndjson"; }
    std::filesystem::path snapshot_path() const { return dir_ / "snapshot.json"; }

private:
    void write_snapshot() const;

    std::filesystem::path dir_;
    Snapshot state_;
    std::vector<std::string> warnings_;
};

}  // namespace porkcast
