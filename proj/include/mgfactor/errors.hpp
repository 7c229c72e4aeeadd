#pragma once

#include <stdexcept>
#include <string>

namespace mgf {

// Base for every error raised by the library. The C API maps each subclass
// onto a status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or counts that do not fit together.
class InvalidDimension : public Error {
 public:
  using Error::Error;
};

// A model state that violates its invariants (e.g. a nonpositive variance).
class InvalidState : public Error {
 public:
  using Error::Error;
};

// Cholesky failure, underflow of all categorical weights, improper posterior.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// User supplied configuration or input that fails validation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mgf
