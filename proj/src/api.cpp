// Eigen must come before httplib: <resolv.h> defines a `_res` macro that breaks Eigen's headers.
#include "porkcast/api.hpp"

#include <cmath>
#include <stdexcept>

#include <httplib.h>

#include "porkcast/analysis.hpp"
#include "porkcast/errors.hpp"

namespace porkcast {

namespace {

ApiResponse json_response(int status, const nlohmann::json& j) { return {status, j.dump()}; }

ApiResponse error_response(int status, const std::string& code, const std::string& message) {
    return json_response(status, {{"error", {{"code", code}, {"message", message}}}});
}

nlohmann::json markets_json(const Service& service, const Snapshot& s) {
    nlohmann::json list = nlohmann::json::array();
    const auto& calendar = service.config().calendar;
    for (const auto& [market, points] : s.series) {
        if (points.empty()) continue;
        const Weekday day = calendar.contains(market) ? calendar.weekday_of(market) : points.rbegin()->second.weekday;
        list.push_back({{"id", market},
                        {"name", default_display_name(market)},
                        {"weekday", std::string(to_string(day))},
                        {"first_week", points.begin()->first.to_string()},
                        {"last_week", points.rbegin()->first.to_string()},
                        {"last_price", points.rbegin()->second.price.value()},
                        {"observations", points.size()},
                        {"target", market == service.config().target_market}});
    }
    return {{"target", service.config().target_market}, {"markets", list}};
}

ApiResponse series_response(const Snapshot& s, const std::string& market,
                            const std::map<std::string, std::string>& query) {
    const auto it = s.series.find(market);
    if (it == s.series.end()) return error_response(404, "not_found", "unknown market '" + market + "'");
    std::optional<IsoWeek> from;
    std::optional<IsoWeek> to;
    if (auto q = query.find("from"); q != query.end()) from = IsoWeek::parse(q->second);
    if (auto q = query.find("to"); q != query.end()) to = IsoWeek::parse(q->second);
    nlohmann::json points = nlohmann::json::array();
    for (const auto& [week, obs] : it->second) {
        if ((from && week < *from) || (to && week > *to)) continue;
        points.push_back({{"week", week.to_string()}, {"price", obs.price.value()}, {"source", obs.source}});
    }
    return json_response(200, {{"market", market}, {"points", points}});
}

nlohmann::json history_json(const Snapshot& s) {
    nlohmann::json forecasts = nlohmann::json::array();
    for (const auto& [week, f] : s.forecasts) forecasts.push_back(f.to_json());
    nlohmann::json settlements = nlohmann::json::array();
    for (const auto& [week, r] : s.settlements) settlements.push_back(r.to_json());
    nlohmann::json pairs = nlohmann::json::array();
    double max_abs = 0.0;
    double max_pct = 0.0;
    for (const auto& [week, f] : s.forecasts) {
        const auto settled = s.settlements.find(week);
        if (settled == s.settlements.end()) continue;
        const double err = std::abs(f.predicted_price - settled->second.agreed_price);
        const double pct = 100.0 * err / settled->second.agreed_price;
        max_abs = std::max(max_abs, err);
        max_pct = std::max(max_pct, pct);
        pairs.push_back({{"week", week.to_string()},
                         {"predicted", f.predicted_price},
                         {"agreed", settled->second.agreed_price},
                         {"abs_error", err},
                         {"pct_error", pct}});
    }
    const bool any = !pairs.empty();
    return {{"forecasts", forecasts},
            {"settlements", settlements},
            {"pairs", pairs},
            {"max_abs_error", any ? nlohmann::json(max_abs) : nlohmann::json(nullptr)},
            {"max_pct_error", any ? nlohmann::json(max_pct) : nlohmann::json(nullptr)}};
}

ApiResponse route(Service& service, const std::string& method, const std::string& path,
                  const std::map<std::string, std::string>& query, const std::string& body) {
    const bool get = method == "GET";
    const bool post = method == "POST";
    auto wrong_method = [&] { return error_response(405, "method_not_allowed", method + " not allowed on " + path); };

    if (path == "/api/health") {
        if (!get) return wrong_method();
        const auto s = service.snapshot();
        nlohmann::json last = nullptr;
        bool stale = false;
        if (s->last_cycle) {
            last = s->last_cycle->value("at", std::string());
            stale = s->last_cycle->value("stale", false);
        }
        return json_response(200, {{"status", "ok"}, {"last_cycle", last}, {"events", s->events}, {"stale", stale}});
    }
    if (path == "/api/markets") {
        if (!get) return wrong_method();
        return json_response(200, markets_json(service, *service.snapshot()));
    }
    if (path.rfind("/api/series/", 0) == 0) {
        if (!get) return wrong_method();
        return series_response(*service.snapshot(), path.substr(12), query);
    }
    if (path == "/api/correlations") {
        if (!get) return wrong_method();
        const CorrelationMatrix m = pearson_matrix(service.panel());
        nlohmann::json ids = nlohmann::json::array();
        for (const auto& market : m.markets) ids.push_back(market.id);
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index i = 0; i < m.r.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (Eigen::Index j = 0; j < m.r.cols(); ++j) row.push_back(m.r(i, j));
            rows.push_back(row);
        }
        return json_response(200, {{"markets", ids}, {"matrix", rows}});
    }
    if (path == "/api/forecast/latest") {
        if (!get) return wrong_method();
        const auto s = service.snapshot();
        if (s->forecasts.empty()) return error_response(404, "not_found", "no forecast yet");
        return json_response(200, s->forecasts.rbegin()->second.to_json());
    }
    if (path == "/api/forecast/history") {
        if (!get) return wrong_method();
        return json_response(200, history_json(*service.snapshot()));
    }
    if (path == "/api/report") {
        if (!get) return wrong_method();
        const auto s = service.snapshot();
        if (!s->report) return error_response(404, "not_found", "no evaluation report has been published");
        return json_response(200, *s->report);
    }
    if (path == "/api/settlement") {
        if (!post) return wrong_method();
        const auto j = nlohmann::json::parse(body);
        if (!j.is_object()) throw std::invalid_argument("body must be a JSON object");
        if (!j.contains("agreed_price") || !j.at("agreed_price").is_number()) {
            throw std::invalid_argument("agreed_price must be a number");
        }
        const IsoWeek week = IsoWeek::parse(j.at("week").get<std::string>());
        const auto r = service.record_settlement(week, j.at("agreed_price").get<double>(),
                                                 j.value("entered_by", std::string()));
        return json_response(201, r.to_json());
    }
    if (path == "/api/cycle") {
        if (!post) return wrong_method();
        return json_response(200, service.run_weekly_cycle().to_json());
    }
    if (path == "/api/whatif") {
        if (!post) return wrong_method();
        const auto j = body.empty() ? nlohmann::json::object() : nlohmann::json::parse(body);
        if (!j.is_object()) throw std::invalid_argument("body must be a JSON object");
        std::vector<PriceOverride> overrides;
        for (const auto& o : j.value("overrides", nlohmann::json::array())) {
            if (!o.contains("price") || !o.at("price").is_number()) throw std::invalid_argument("price must be a number");
            overrides.push_back({o.at("market").get<std::string>(), IsoWeek::parse(o.at("week").get<std::string>()),
                                 o.at("price").get<double>()});
        }
        return json_response(200, service.what_if(overrides).to_json());
    }
    return error_response(404, "not_found", "no route for " + path);
}

}  // namespace

ApiResponse handle_api_request(Service& service, const std::string& method, const std::string& path,
                               const std::map<std::string, std::string>& query, const std::string& body) {
    try {
        return route(service, method, path, query, body);
    } catch (const ConflictError& e) {
        return error_response(409, "conflict", e.what());
    } catch (const DataError& e) {
        return error_response(409, "insufficient_data", e.what());
    } catch (const StoreError& e) {
        return error_response(500, "store_error", e.what());
    } catch (const nlohmann::json::exception& e) {
        return error_response(400, "bad_request", e.what());
    } catch (const std::invalid_argument& e) {
        return error_response(400, "bad_request", e.what());
    } catch (const std::out_of_range& e) {
        return error_response(400, "bad_request", e.what());
    } catch (const std::exception& e) {
        return error_response(500, "internal", e.what());
    }
}

struct ApiServer::Impl {
    Service& service;
    httplib::Server server;

    explicit Impl(Service& s) : service(s) {
        auto handler = [this](const httplib::Request& req, httplib::Response& res) {
            std::map<std::string, std::string> query;
            for (const auto& [k, v] : req.params) query[k] = v;
            const ApiResponse r = handle_api_request(service, req.method, req.path, query, req.body);
            res.status = r.status;
            res.set_content(r.body, "application/json; charset=utf-8");
        };
        server.Get(".*", handler);
        server.Post(".*", handler);
        server.Put(".*", handler);
        server.Delete(".*", handler);
    }
};

ApiServer::ApiServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = impl_->server.bind_to_any_port(host);
        if (bound < 0) throw std::runtime_error("cannot bind " + host);
        return bound;
    }
    if (!impl_->server.bind_to_port(host, port)) {
        throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port) + " (port in use?)");
    }
    return port;
}

void ApiServer::listen() { impl_->server.listen_after_bind(); }

void ApiServer::start() {
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void ApiServer::stop() {
    impl_->server.stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace porkcast
