#pragma once

#include <stdexcept>
#include <string>

namespace cardiosynth {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration, manifest or spec file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Tensor/volume shape disagreement or unsupported size.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument value outside the accepted domain.
class ValueError : public Error {
 public:
  using Error::Error;
};

/// File content that cannot be decoded.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint content does not match its stored digest.
class DigestMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Non-finite loss during optimisation.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

}  // namespace cardiosynth
