#pragma once

#include <stdexcept>
#include <string>

namespace edpt {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed configuration, CLI arguments, or scenario parameters.
struct ConfigError : Error {
  using Error::Error;
};

// Invalid or inconsistent input data (CSV parsing, dataset invariants).
struct DataError : Error {
  using Error::Error;
};

// Numerical failure: non-positive-definite factorization, series
// non-convergence, singular Hessian.
struct NumericalError : Error {
  using Error::Error;
};

// A test whose preconditions fail on the given data (degenerate Wald
// denominator, separated logistic MLE). Callers may count these rather
// than abort.
struct TestInapplicable : Error {
  using Error::Error;
};

}  // namespace edpt
