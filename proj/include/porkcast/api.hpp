#pragma once

#include <map>
#include <memory>
#include <string>
#include <thread>

#include "porkcast/service.hpp"

namespace porkcast {

struct ApiResponse {
    int status = 200;
    std::string body;  // UTF-8 JSON
};

/**
 * Routes one request to the service. Paths and query parameters follow the
 * dashboard contract; errors come back as {"error": {"code", "message"}}.
 * Usable without a socket, which is how most of the API is tested.
 */
ApiResponse handle_api_request(Service& service, const std::string& method, const std::string& path,
                               const std::map<std::string, std::string>& query, const std::string& body);

/// HTTP front end over handle_api_request.
class ApiServer {
public:
    explicit ApiServer(Service& service);
    ~ApiServer();

    ApiServer(const ApiServer&) = delete;
    ApiServer& operator=(const ApiServer&) = delete;

    /// Binds host:port (port 0 picks a free one) and returns the bound port. Throws std::runtime_error when busy.
    int bind(const std::string& host, int port);
    /// Serves on the calling thread until stop().
    void listen();
    /// Serves on a background thread.
    void start();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::thread thread_;
};

}  // namespace porkcast
