#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "porkcast/config.hpp"
#include "porkcast/evaluation.hpp"
#include "porkcast/ingest.hpp"
#include "porkcast/store.hpp"

namespace porkcast {

/// The request conflicts with the service state (e.g. what-if before any champion exists).
class ConflictError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Clock = std::function<std::chrono::system_clock::time_point()>;

/// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_timestamp(std::chrono::system_clock::time_point t);

struct CycleSummary {
    std::string status;  // "ok", "no-op", "failed"
    std::string message;
    IsoWeek week;        // ISO week of the clock at cycle time
    std::size_t new_observations = 0;
    std::size_t changed_observations = 0;
    std::size_t repairs = 0;
    bool stale = false;
    std::vector<std::string> errors;
    std::optional<ForecastRecord> forecast;

    nlohmann::json to_json() const;
};

struct PriceOverride {
    std::string market;
    IsoWeek week;
    double price = 0.0;
};

struct WhatIfResult {
    ForecastRecord forecast;
    std::optional<ForecastRecord> baseline;  // active forecast for the same week
    std::size_t overrides_applied = 0;

    nlohmann::json to_json() const;
};

/**
 * Weekly forecasting service over an event-sourced store.
 *
 * Every mutation (cycle, settlement, published report) runs under one writer
 * mutex and appends to the store; readers get an immutable snapshot that is
 * swapped after each write, so a reader never sees a half-applied batch.
 */
class Service {
public:
    /// Opens (or creates) the store in config.data_dir. Throws StoreError on corruption.
    explicit Service(ServiceConfig config, Clock clock = {});
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    const ServiceConfig& config() const { return config_; }
    std::shared_ptr<const Snapshot> snapshot() const;
    /// Warnings raised while opening the store (dropped partial lines, rebuilt snapshot).
    std::vector<std::string> store_warnings() const { return warnings_; }

    /**
     * fetch, merge new or changed observations, repair, align, retrain the
     * champion and forecast the week after the last panel week. Fetch
     * failures fall back to stored data and mark the cycle stale; training
     * failures withhold the forecast and log an alert.
     */
    CycleSummary run_weekly_cycle();

    /// Throws std::invalid_argument for a non-positive price or a week past the current forecast week.
    SettlementRecord record_settlement(const IsoWeek& week, double agreed_price, const std::string& entered_by);

    /// Forecast with the stored champion on the panel plus overrides. Nothing is persisted.
    WhatIfResult what_if(const std::vector<PriceOverride>& overrides) const;

    void publish_report(const nlohmann::json& report);

    /// Repaired, aligned panel of the stored series. Throws DataError when there is nothing to align.
    PricePanel panel() const;

    /// True when the configured weekday and hour have passed and no cycle ran this ISO week.
    bool cycle_due(std::chrono::system_clock::time_point now) const;

    /// Background thread that runs the cycle when due, checking every `tick`.
    void start_scheduler(std::chrono::milliseconds tick = std::chrono::seconds(30));
    void stop_scheduler();

private:
    std::chrono::system_clock::time_point now() const { return clock_(); }
    void publish(const Snapshot& s);

    ServiceConfig config_;
    Clock clock_;
    mutable std::mutex writer_;
    mutable std::mutex snapshot_mu_;
    std::unique_ptr<Store> store_;
    std::shared_ptr<const Snapshot> current_;
    std::vector<std::string> warnings_;

    std::thread scheduler_;
    std::mutex scheduler_mu_;
    std::condition_variable scheduler_cv_;
    bool stopping_ = false;
};

/// Builds series from stored observations, repairs them and aligns them.
struct StoredPanel {
    PricePanel panel;
    RepairLog repairs;
};
StoredPanel panel_from_snapshot(const Snapshot& snapshot, double outlier_threshold);

}  // namespace porkcast
