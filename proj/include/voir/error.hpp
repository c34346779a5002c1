#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace voir {

enum class ErrorCode {
    not_found,
    invalid_argument,
    invalid_region,
    invalid_query,
    invalid_config,
    schema_mismatch,
    conflict,
    dangling_key,
    duplicate_key,
    unsupported_operation,
    mode_violation,
    precondition,
    degenerate_sample,
    cannot_compose_query,
    checksum_mismatch,
    version_mismatch,
    partial_file,
    parse_error,
    io_error,
};

std::string_view to_string(ErrorCode code);

// Every engine failure is reported through this type; `code()` is stable
// and is what the HTTP layer maps to a status.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace voir
