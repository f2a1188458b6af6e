#pragma once

#include <stdexcept>
#include <string>

namespace mensp {

/// Broad failure class; the CLI maps each one onto a distinct exit code.
enum class ErrorKind { config, data, backend };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class BackendError : public Error {
 public:
  explicit BackendError(const std::string& what) : Error(ErrorKind::backend, what) {}
};

/// Raised when a backend kind does not implement an operation (e.g. fine-tuning a mock).
class UnsupportedOperation : public BackendError {
 public:
  explicit UnsupportedOperation(const std::string& what) : BackendError(what) {}
};

/// Training produced a non-finite loss.
class TrainingDiverged : public BackendError {
 public:
  explicit TrainingDiverged(const std::string& what) : BackendError(what) {}
};

/// A zero-norm embedding reached a cosine computation.
class DegenerateEmbedding : public DataError {
 public:
  explicit DegenerateEmbedding(const std::string& what) : DataError(what) {}
};

}  // namespace mensp
