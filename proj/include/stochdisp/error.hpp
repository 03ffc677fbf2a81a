#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stochdisp {

enum class ErrorKind {
    invalid_argument,      // rejected input: non-finite time, negative tau, bad sizes
    unsupported_exponent,  // Lorentz exponents outside the supported range
    grid_mismatch,         // fields or symbols living on different grids
    configuration,         // potential support / config validation
    resource,              // dense factorization or series order above the cap
    no_bound_state,        // ground-state search ended with E0 >= 0
    singular_time,         // pseudoconformal evaluation too close to t = 0
    io                     // file read/write failures
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::invalid_argument: return "invalid_argument";
        case ErrorKind::unsupported_exponent: return "unsupported_exponent";
        case ErrorKind::grid_mismatch: return "grid_mismatch";
        case ErrorKind::configuration: return "configuration";
        case ErrorKind::resource: return "resource";
        case ErrorKind::no_bound_state: return "no_bound_state";
        case ErrorKind::singular_time: return "singular_time";
        case ErrorKind::io: return "io";
    }
    return "unknown";
}

/// Single exception type for the library; `kind()` lets callers branch
/// without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), message_(message) {}

    ErrorKind kind() const noexcept { return kind_; }
    /// The message without the kind prefix.
    const std::string& message() const noexcept { return message_; }

private:
    ErrorKind kind_;
    std::string message_;
};

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) throw Error(kind, message);
}

}  // namespace stochdisp
