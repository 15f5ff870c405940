#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cai {

enum class ErrorCode {
    invalid_argument,
    parse,
    io,
    precondition,
    network,
    not_found,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::parse: return "parse";
        case ErrorCode::io: return "io";
        case ErrorCode::precondition: return "precondition";
        case ErrorCode::network: return "network";
        case ErrorCode::not_found: return "not_found";
    }
    return "unknown";
}

// Every failure surfaced by the library is a cai::Error carrying a coarse code
// the CLI turns into its machine-parsable error line.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace cai
