// Error types shared by every module.
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mtll {

enum class ErrorKind {
    InvalidParameter,
    InvalidArgument,
    NumericalOverflow,
    CausalityViolation,
    DegenerateEnsemble,
    InvalidInitialization,
    Configuration,
    NoFeasiblePath,
    Divergence,
    Io,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::NumericalOverflow: return "numerical-overflow";
    case ErrorKind::CausalityViolation: return "causality-violation";
    case ErrorKind::DegenerateEnsemble: return "degenerate-ensemble";
    case ErrorKind::InvalidInitialization: return "invalid-initialization";
    case ErrorKind::Configuration: return "configuration";
    case ErrorKind::NoFeasiblePath: return "no-feasible-path";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Io: return "io";
    }
    return "unknown";
}

/// Base exception; `kind()` is stable and machine-readable.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string &what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Thrown by the step simulators; carries the offending step index.
class NumericalOverflow : public Error {
public:
    NumericalOverflow(std::size_t step, const std::string &what)
        : Error(ErrorKind::NumericalOverflow,
                what + " at step " + std::to_string(step)),
          step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string &what) {
    throw Error(kind, what);
}

inline void require(bool ok, ErrorKind kind, const std::string &what) {
    if (!ok) {
        fail(kind, what);
    }
}

} // namespace mtll
