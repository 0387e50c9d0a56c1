// errors.hpp - Exception types shared by all modules

#pragma once

#include <cstddef>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace ote {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input outside an operation's mathematical domain.
struct DomainError : Error {
    using Error::Error;
};

// Configuration is syntactically valid but not supported (e.g. unequal emitter heights).
struct UnsupportedConfiguration : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

// Problem size beyond a configured limit.
struct ResourceError : Error {
    using Error::Error;
};

// Adaptive quadrature or iterative solve did not reach tolerance.
struct ConvergenceError : Error {
    ConvergenceError(const std::string& what, double residual)
        : Error(what + " (residual " + format(residual) + ")"), residual(residual) {}
    double residual;

private:
    static std::string format(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", v);
        return buf;
    }
};

// Rate matrices that do not define a valid dissipator.
struct InvalidDissipator : Error {
    using Error::Error;
};

struct DegeneracyError : Error {
    DegeneracyError(const std::string& what, std::size_t dimension)
        : Error(what + " (null space dimension " + std::to_string(dimension) + ")"), dimension(dimension) {}
    std::size_t dimension;
};

struct SolverFailure : Error {
    using Error::Error;
};

// Time integration could not proceed; the generator is too stiff for explicit stepping.
struct StiffnessError : SolverFailure {
    using SolverFailure::SolverFailure;
};

struct NonDiagonalizable : Error {
    using Error::Error;
};

} // namespace ote
