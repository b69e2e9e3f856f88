#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "porkcast/core.hpp"
#include "porkcast/ingest.hpp"
#include "porkcast/models.hpp"

namespace porkcast {

struct ChampionConfig {
    ModelFamily family = ModelFamily::Ridge;
    Params params = reference_params(ModelFamily::Ridge);  // includes the window
    std::uint64_t seed = 7;
};

/**
 * Service and pipeline configuration, read from JSON with keys
 * sources[], target_market, calendar{}, scenario, champion{}, listen_addr,
 * cycle_weekday, data_dir (plus optional cycle_hour, outlier_threshold).
 */
struct ServiceConfig {
    std::vector<Source> sources;
    std::string target_market = "ES-LLEIDA";
    PublicationCalendar calendar = PublicationCalendar::spanish_default();
    LagScenario scenario = LagScenario::public_delayed(2);
    ChampionConfig champion;
    std::string listen_addr = "127.0.0.1:8080";
    Weekday cycle_weekday = Weekday::Fri;
    int cycle_hour = 6;  // UTC
    std::filesystem::path data_dir = "data/store";
    double outlier_threshold = 0.5;

    /// Relative source paths and data_dir resolve against `base_dir`. Throws std::invalid_argument on bad values.
    static ServiceConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    nlohmann::json to_json() const;

    std::string listen_host() const;
    int listen_port() const;
};

/// Reads and parses a config file. Throws DataError when unreadable or malformed.
ServiceConfig load_config(const std::filesystem::path& path);

}  // namespace porkcast
