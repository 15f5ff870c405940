#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <map>
#include <string>

namespace cai::http {

struct RetryPolicy {
    int max_attempts = 3;
    int base_backoff_ms = 500;
    int max_backoff_ms = 30'000;
};

/// Delay before retry number `attempt` (1-based): base * 2^(attempt-1), capped.
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt);

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;    // always starts with '/'
};

Endpoint parse_url(const std::string& url);

/// Joins a base URL and a relative path, avoiding a doubled slash.
std::string join_url(const std::string& base, const std::string& path);

using Headers = std::map<std::string, std::string>;

struct PostOptions {
    RetryPolicy retry;
    std::chrono::seconds timeout{120};
    // Incremented once per HTTP request actually sent, retries included.
    std::atomic<std::size_t>* request_counter = nullptr;
};

/// POSTs a JSON body and returns the 2xx response body. Transport failures,
/// 429 and 5xx responses are retried with exponential backoff; any other
/// status fails immediately.
std::string post_json(const std::string& url, const std::string& body, const Headers& headers,
                      const PostOptions& options);

/// Reads a bearer token from the named environment variable. An empty name
/// means no authentication; a named but unset variable is an error.
Headers auth_headers(const std::string& api_key_env);

}  // namespace cai::http
