#pragma once

#include <stdexcept>
#include <string>

namespace flowte {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or invariant-violating input document or value.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Problem too large for an exhaustive routine.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown (non-finite values, divergence).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Requested target cannot be met (e.g. calibration).
class UnreachableError : public Error {
 public:
  using Error::Error;
};

}  // namespace flowte
