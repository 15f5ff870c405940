#include "cai/http.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "cai/error.hpp"

namespace cai::http {

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt) {
    const int shift = std::clamp(attempt - 1, 0, 30);
    const long long delay = static_cast<long long>(policy.base_backoff_ms) << shift;
    return std::chrono::milliseconds(std::min<long long>(delay, policy.max_backoff_ms));
}

Endpoint parse_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCode::invalid_argument, "URL needs a scheme: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::string join_url(const std::string& base, const std::string& path) {
    std::string b = base;
    while (!b.empty() && b.back() == '/') b.pop_back();
    return path.empty() || path.front() == '/' ? b + path : b + "/" + path;
}

std::string post_json(const std::string& url, const std::string& body, const Headers& headers,
                      const PostOptions& options) {
    if (options.retry.max_attempts < 1) {
        throw Error(ErrorCode::invalid_argument, "max_attempts must be >= 1");
    }
    const Endpoint ep = parse_url(url);
    httplib::Client client(ep.origin);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(options.timeout).count());
    client.set_read_timeout(options.timeout.count());
    client.set_write_timeout(options.timeout.count());

    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) hdrs.emplace(k, v);

    std::string last_failure;
    for (int attempt = 1; attempt <= options.retry.max_attempts; ++attempt) {
        if (options.request_counter) options.request_counter->fetch_add(1, std::memory_order_relaxed);
        auto res = client.Post(ep.path, hdrs, body, "application/json");
        if (!res) {
            last_failure = "transport error: " + httplib::to_string(res.error());
        } else if (res->status >= 200 && res->status < 300) {
            return res->body;
        } else if (res->status == 429 || res->status >= 500) {
            last_failure = "HTTP " + std::to_string(res->status);
        } else {
            throw Error(ErrorCode::network, "HTTP " + std::to_string(res->status) + " from " + url);
        }
        if (attempt < options.retry.max_attempts) {
            std::this_thread::sleep_for(backoff_delay(options.retry, attempt));
        }
    }
    throw Error(ErrorCode::network, "retries exhausted after " + std::to_string(options.retry.max_attempts) +
                                        " attempts (" + last_failure + ") for " + url);
}

Headers auth_headers(const std::string& api_key_env) {
    if (api_key_env.empty()) return {};
    const char* key = std::getenv(api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw Error(ErrorCode::precondition, "environment variable " + api_key_env + " is not set");
    }
    return {{"Authorization", std::string("Bearer ") + key}};
}

}  // namespace cai::http
