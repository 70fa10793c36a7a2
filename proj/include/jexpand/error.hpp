#pragma once

#include <stdexcept>
#include <string>

namespace jexpand {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents disagree with what an operation requires.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value was stored into, or produced by, a tensor.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the operation's domain (bad stride, eps <= 0, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Input data violates a documented contract (empty split, stats source, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure: missing file, unwritable directory, short write.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Tensor file errors. Each failure mode has its own type so callers can
/// distinguish a foreign file from an outdated or damaged one.
class FormatError : public IoError {
 public:
  using IoError::IoError;
};
class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};
class VersionMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};
class TruncatedFileError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Config file could not be parsed or failed schema validation.
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace jexpand
