#pragma once

#include <stdexcept>
#include <string>

namespace ddlqr {

// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

struct ShapeMismatch : Error {
    using Error::Error;
};

// An iterative routine hit its iteration cap without meeting its tolerance.
struct NonConvergence : Error {
    using Error::Error;
};

// Cholesky (or another PD certificate) failed.
struct NotPositiveDefinite : Error {
    using Error::Error;
};

// A Lyapunov/covariance computation was asked for an unstable closed loop.
struct Unstable : Error {
    using Error::Error;
};

struct NotStabilizable : Error {
    using Error::Error;
};

// Data matrix D0 = [U0; Y0] is rank deficient; synthesis refuses to run.
struct NotInformative : Error {
    using Error::Error;
};

// The linear system U0 M = I, Y0 M = 0 has no solution.
struct MInfeasible : Error {
    using Error::Error;
};

struct InfeasibleProgram : Error {
    using Error::Error;
};

struct NumericalFailure : Error {
    using Error::Error;
};

// Certificate matrix (Y or Sigma) is numerically singular; no gain extracted.
struct SingularCertificate : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace ddlqr
