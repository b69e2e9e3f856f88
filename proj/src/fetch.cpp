// Eigen must come before httplib: <resolv.h> defines a `_res` macro that breaks Eigen's headers.
#include "porkcast/ingest.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "porkcast/errors.hpp"

namespace porkcast {

namespace {

bool valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        std::size_t extra = 0;
        if (c < 0x80) {
            extra = 0;
        } else if ((c & 0xE0) == 0xC0 && c >= 0xC2) {
            extra = 1;
        } else if ((c & 0xF0) == 0xE0) {
            extra = 2;
        } else if ((c & 0xF8) == 0xF0 && c <= 0xF4) {
            extra = 3;
        } else {
            return false;
        }
        if (i + extra >= s.size() && extra > 0) {
            return false;
        }
        for (std::size_t k = 1; k <= extra; ++k) {
            if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) {
                return false;
            }
        }
        i += extra + 1;
    }
    return true;
}

std::string checked(std::string body, const std::string& where) {
    if (!valid_utf8(body)) {
        throw FetchError(FetchError::Kind::Decode, "source " + where + " is not valid UTF-8");
    }
    return body;
}

std::string read_local(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FetchError(FetchError::Kind::Missing, "cannot open local source '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return checked(ss.str(), path);
}

}  // namespace

std::string fetch_source(const Source& source, std::chrono::milliseconds timeout) {
    const std::string& url = source.url;
    if (url.starts_with("file://")) {
        return read_local(url.substr(7));
    }
    const bool http = url.starts_with("http://");
    const bool https = url.starts_with("https://");
    if (!http && !https) {
        return read_local(url);
    }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (https) {
        throw FetchError(FetchError::Kind::Network, "https sources need a build with OpenSSL: " + url);
    }
#endif
    const auto scheme_end = url.find("://") + 3;
    const auto path_start = url.find('/', scheme_end);
    const std::string origin = url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
    client.set_connection_timeout(static_cast<time_t>(secs.count()), static_cast<time_t>(usecs.count()));
    client.set_read_timeout(static_cast<time_t>(secs.count()), static_cast<time_t>(usecs.count()));
    client.set_follow_location(true);

    std::string last_error;
    for (int attempt = 0; attempt < 2; ++attempt) {
        auto res = client.Get(path);
        if (!res) {
            const auto err = res.error();
            last_error = httplib::to_string(err);
            if (attempt == 1) {
                const auto kind = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                                      ? FetchError::Kind::Timeout
                                      : FetchError::Kind::Network;
                throw FetchError(kind, "fetch " + url + " failed after retry: " + last_error);
            }
            continue;
        }
        if (res->status >= 500 && attempt == 0) {
            continue;
        }
        if (res->status >= 400) {
            const bool gone = res->status == 404 || res->status == 410;
            throw FetchError(gone ? FetchError::Kind::Missing : FetchError::Kind::HttpStatus,
                             "fetch " + url + " returned HTTP " + std::to_string(res->status), res->status);
        }
        return checked(std::move(res->body), url);
    }
    throw FetchError(FetchError::Kind::Network, "fetch " + url + " failed: " + last_error);
}

}  // namespace porkcast
