#pragma once

#include <stdexcept>
#include <string>

namespace gcr {

// Base type for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Factorization rejected the input (non-symmetric, indefinite, or a pivot
// collapsed below tolerance).
struct NotPositiveDefinite : Error {
  using Error::Error;
};

// A rank-1 downdate would make the matrix singular or indefinite.
struct DowndateSingular : Error {
  using Error::Error;
};

struct EmptyInput : Error {
  using Error::Error;
};

// A cluster-count vector contains an empty cluster where only occupied
// clusters are allowed.
struct EmptyCluster : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

struct LengthMismatch : Error {
  using Error::Error;
};

// Problem size exceeds a guard rail (e.g. exhaustive enumeration bounds).
struct TooLarge : Error {
  using Error::Error;
};

// An iterative routine hit its iteration cap without meeting its target.
struct NonConvergence : Error {
  using Error::Error;
};

struct EigenFailure : Error {
  using Error::Error;
};

// A generated subspace angle fell too close to vertical for tan() to be
// meaningful.
struct DegenerateAngle : Error {
  using Error::Error;
};

// Adaptive numerical integration failed to stabilize.
struct QuadratureFailure : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace gcr
