#pragma once

#include <stdexcept>
#include <string>

namespace corml {

/// Base of every error raised by the library. The CLI maps each subclass to
/// an exit code (usage 1, data 2, numerical 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public DataError {
 public:
  using DataError::DataError;
};

class ModelFileError : public DataError {
 public:
  enum class Reason { io, version_mismatch, checksum, truncated, malformed };

  ModelFileError(Reason reason, const std::string& what)
      : DataError(what), reason_(reason) {}

  Reason reason() const noexcept { return reason_; }

 private:
  Reason reason_;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace corml
