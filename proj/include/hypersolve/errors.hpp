#pragma once

#include <stdexcept>
#include <string>

namespace hypersolve {

/// Base class for every error raised by the library.
///
/// Errors fall into two families that the CLI maps onto distinct exit codes:
/// validation problems (bad input, bad configuration, misuse of an API) and
/// numerical failures detected while computing (instability, non-finite
/// values, non-converging eigensolvers, ill-posed boundary solves).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    [[nodiscard]] virtual bool is_numerical() const noexcept { return false; }
};

/// Inconsistent use of an API (wrong dimensions, wrong norm kind, ...).
class UsageError : public Error {
public:
    using Error::Error;
};

/// A system or boundary configuration that violates a mathematical
/// precondition (A not positive definite, wrong Phi row count, ...).
class ConfigurationError : public Error {
public:
    using Error::Error;
};

/// User-provided data that cannot be used (non-finite initial values, ...).
class InputError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
    [[nodiscard]] bool is_numerical() const noexcept override { return true; }
};

/// Courant bound violated, or non-finite values produced by a step.
class StabilityError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// The incoming-invariant block of a boundary face system is singular.
class IllPosedBoundaryError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class EigenSolverError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Every pencil of the system vanishes, so no time step can be derived.
class DegenerateSystemError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace hypersolve
