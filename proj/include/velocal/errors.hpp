#pragma once

#include <stdexcept>
#include <string>

namespace velocal {

/// Base class for all velocal errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Query time outside a spline's evaluation domain. Message carries the valid interval.
class DomainError : public Error {
public:
    DomainError(double t, double lo, double hi)
        : Error("time " + std::to_string(t) + " outside evaluation domain [" +
                std::to_string(lo) + ", " + std::to_string(hi) + ")"),
          t(t), lo(lo), hi(hi) {}
    double t, lo, hi;
};

/// Malformed input data or configuration.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Geometry too degenerate for a closed-form solve (collinear points, rank loss).
class DegenerateGeometryError : public Error {
public:
    using Error::Error;
};

/// Motion does not excite the parameters being estimated.
class ObservabilityError : public Error {
public:
    using Error::Error;
};

/// File read/write failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// Optimizer could not make progress.
class SolverError : public Error {
public:
    using Error::Error;
};

}  // namespace velocal
