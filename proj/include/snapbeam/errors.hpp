#pragma once

#include <stdexcept>
#include <string>

namespace snapbeam {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Geometry parameters that cannot produce a valid (non self-intersecting) layout.
class GeometryInfeasible : public Error {
public:
    using Error::Error;
};

/// Inconsistent model or input description (bad tags, missing nodes, bad config).
class SpecificationError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Element shrank to (numerically) zero length.
class SingularElement : public Error {
public:
    using Error::Error;
};

/// Newton iteration failed to reach the residual tolerance.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double last_residual)
        : Error(what), last_residual_(last_residual) {}
    double last_residual() const { return last_residual_; }

private:
    double last_residual_;
};

/// Tangent became singular under fixed control; continuation must switch to arc-length.
class FoldSingularity : public Error {
public:
    using Error::Error;
};

/// Arc-length radius underflowed before the path reached its target.
class TraceStalled : public Error {
public:
    using Error::Error;
};

/// No stable landing branch at a jump control while emulating displacement control.
class EmulationIncomplete : public Error {
public:
    using Error::Error;
};

/// Time integration diverged.
class IntegrationError : public Error {
public:
    using Error::Error;
};

}  // namespace snapbeam
