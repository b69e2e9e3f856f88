#include "porkcast/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "porkcast/errors.hpp"

namespace porkcast {

namespace {

std::string resolve(const std::string& path, const std::filesystem::path& base) {
    if (path.find("://") != std::string::npos || base.empty()) return path;
    const std::filesystem::path p(path);
    return p.is_absolute() ? path : (base / p).lexically_normal().string();
}

}  // namespace

ServiceConfig ServiceConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    ServiceConfig c;
    if (j.contains("sources")) {
        for (const auto& s : j.at("sources")) {
            if (s.is_string()) {
                c.sources.push_back({resolve(s.get<std::string>(), base_dir), "csv"});
            } else {
                c.sources.push_back({resolve(s.at("url").get<std::string>(), base_dir), s.value("format_hint", "csv")});
            }
        }
    }
    c.target_market = j.value("target_market", c.target_market);
    if (j.contains("calendar")) {
        std::map<std::string, Weekday> days;
        for (const auto& [market, day] : j.at("calendar").items()) days[market] = weekday_from_string(day.get<std::string>());
        c.calendar = PublicationCalendar(std::move(days));
    }
    if (j.contains("scenario")) c.scenario = LagScenario::parse(j.at("scenario").get<std::string>());
    if (j.contains("champion")) {
        const auto& ch = j.at("champion");
        c.champion.family = family_from_string(ch.value("family", std::string("ridge")));
        if (family_info(c.champion.family).single_series) {
            throw std::invalid_argument("the champion must be a multi-market model");
        }
        c.champion.params = reference_params(c.champion.family);
        if (ch.contains("hyperparams")) {
            for (const auto& [k, v] : params_from_json(ch.at("hyperparams"))) c.champion.params[k] = v;
        }
        c.champion.seed = ch.value("seed", c.champion.seed);
    }
    c.listen_addr = j.value("listen_addr", c.listen_addr);
    if (j.contains("cycle_weekday")) c.cycle_weekday = weekday_from_string(j.at("cycle_weekday").get<std::string>());
    c.cycle_hour = j.value("cycle_hour", c.cycle_hour);
    if (c.cycle_hour < 0 || c.cycle_hour > 23) throw std::invalid_argument("cycle_hour must lie in 0..23");
    if (j.contains("data_dir")) c.data_dir = resolve(j.at("data_dir").get<std::string>(), base_dir);
    c.outlier_threshold = j.value("outlier_threshold", c.outlier_threshold);
    if (!(c.outlier_threshold > 0.0)) throw std::invalid_argument("outlier_threshold must be positive");
    if (!c.calendar.contains(c.target_market)) {
        throw std::invalid_argument("target market " + c.target_market + " has no calendar entry");
    }
    c.listen_port();
    return c;
}

nlohmann::json ServiceConfig::to_json() const {
    nlohmann::json sources_j = nlohmann::json::array();
    for (const auto& s : sources) sources_j.push_back({{"url", s.url}, {"format_hint", s.format_hint}});
    nlohmann::json cal = nlohmann::json::object();
    for (const auto& [m, d] : calendar.entries()) cal[m] = std::string(porkcast::to_string(d));
    return {{"sources", sources_j},
            {"target_market", target_market},
            {"calendar", cal},
            {"scenario", scenario.name()},
            {"champion",
             {{"family", family_info(champion.family).id},
              {"hyperparams", porkcast::to_json(champion.params)},
              {"seed", champion.seed}}},
            {"listen_addr", listen_addr},
            {"cycle_weekday", std::string(porkcast::to_string(cycle_weekday))},
            {"cycle_hour", cycle_hour},
            {"data_dir", data_dir.string()},
            {"outlier_threshold", outlier_threshold}};
}

std::string ServiceConfig::listen_host() const {
    const auto colon = listen_addr.rfind(':');
    return colon == std::string::npos ? listen_addr : listen_addr.substr(0, colon);
}

int ServiceConfig::listen_port() const {
    const auto colon = listen_addr.rfind(':');
    if (colon == std::string::npos) throw std::invalid_argument("listen_addr must be host:port");
    int port = -1;
    try {
        port = std::stoi(listen_addr.substr(colon + 1));
    } catch (const std::exception&) {
        port = -1;
    }
    if (port < 0 || port > 65535) throw std::invalid_argument("bad port in listen_addr '" + listen_addr + "'");
    return port;
}

ServiceConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return ServiceConfig::from_json(nlohmann::json::parse(ss.str()), path.parent_path());
    } catch (const nlohmann::json::exception& e) {
        throw DataError("malformed config " + path.string() + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw DataError("invalid config " + path.string() + ": " + e.what());
    } catch (const std::out_of_range& e) {
        throw DataError("invalid config " + path.string() + ": " + e.what());
    }
}

}  // namespace porkcast
