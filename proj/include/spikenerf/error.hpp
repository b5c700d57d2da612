#pragma once

#include <stdexcept>
#include <string>

namespace spikenerf {

enum class ErrorCode {
    invalid_argument,
    out_of_bounds,
    shape_mismatch,
    non_finite,
    io,
    parse,
    bad_magic,
    unsupported_version,
    truncated,
    config,
};

/// Exception carrying a machine-readable code alongside the message.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

namespace detail {

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const char* what) {
    if (!cond) fail(code, what);
}

} // namespace detail
} // namespace spikenerf
