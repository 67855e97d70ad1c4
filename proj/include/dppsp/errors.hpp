#pragma once

#include <stdexcept>
#include <string>

namespace dppsp {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct DimensionMismatch : Error {
    using Error::Error;
};

/// Mixing matrix failed a spectral requirement (eigenvalue outside (0,1],
/// tau not strictly above the top Laplacian eigenvalue, ...).
struct SpectrumViolation : Error {
    using Error::Error;
};

/// Eigenvalue 1 of the mixing matrix is not simple, i.e. the underlying
/// graph is not connected.
struct Disconnected : Error {
    using Error::Error;
};

struct NumericalError : Error {
    using Error::Error;
};

/// alpha * rho >= 1: the local resolvent is not guaranteed single-valued.
struct StepSizeViolation : Error {
    using Error::Error;
};

/// Inner fixed-point loop exhausted its iteration budget.
struct NoConvergence : Error {
    double residual;
    NoConvergence(const std::string& what, double resid)
        : Error(what), residual(resid) {}
};

struct SingularSystem : Error {
    using Error::Error;
};

struct SingularKKT : Error {
    using Error::Error;
};

struct EmptyTrace : Error {
    using Error::Error;
};

/// A guarantee bound was requested outside its stepsize regime.
struct RegimeViolation : Error {
    using Error::Error;
};

/// Rate fit attempted on a trace segment that sits at the numerical floor.
struct DegenerateFit : Error {
    int floor_round;
    DegenerateFit(const std::string& what, int round)
        : Error(what), floor_round(round) {}
};

struct OracleInconclusive : Error {
    using Error::Error;
};

/// Random instance generation produced an object violating its own
/// invariants (e.g. an operator that fails the required sign pattern).
struct ConstructionFailed : Error {
    using Error::Error;
};

/// Config or data file is syntactically malformed.
struct ParseError : Error {
    int line;
    ParseError(const std::string& what, int line_no)
        : Error(what + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
};

/// Config is well-formed but semantically invalid; names the offending field.
struct ValidationError : Error {
    std::string field;
    ValidationError(const std::string& field_name, const std::string& what)
        : Error("field '" + field_name + "': " + what), field(field_name) {}
};

}  // namespace dppsp
