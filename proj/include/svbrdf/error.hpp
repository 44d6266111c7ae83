#pragma once

#include <stdexcept>
#include <string>

namespace svbrdf {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition violated by a caller-supplied value (bad f35, out-of-bounds pixel, ...).
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// Input is well-formed but carries no usable signal (constant image, black baseColor, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Config document or session contents fail validation.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Response-curve or light-intensity calibration could not be solved.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// Parameter fitting failed in a way that cannot be recovered locally.
class FitError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace svbrdf
