#pragma once

#include <stdexcept>
#include <string>

namespace pamlab {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: invalid model parameters, malformed config, mismatched
/// experiment/class pairs. The CLI maps this to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed to meet its contract (no root bracket,
/// quadrature or eigensolver non-convergence). The CLI maps this to exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace pamlab
