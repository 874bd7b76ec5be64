#pragma once

#include <stdexcept>
#include <string>

namespace tripletalign {

// Base of every error raised by the library. Messages are prefixed with the
// module that raised them, e.g. "dataset: line 4: anchor equals target".
class Error : public std::runtime_error {
 public:
  Error(const std::string& module, const std::string& what)
      : std::runtime_error(module + ": " + what), module_(module) {}
  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

// Malformed input data (CSV rows, manifests, matrix files, result files).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Input parsed but violates an invariant (duplicate ids, NaN values, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Zero-norm vector handed to cosine similarity.
class DegenerateVectorError : public Error {
 public:
  explicit DegenerateVectorError(const std::string& what) : Error("embedding-store", what) {}
};

// Correlation of a vector with zero variance.
class UndefinedCorrelationError : public Error {
 public:
  explicit UndefinedCorrelationError(const std::string& what) : Error("repr-eval", what) {}
};

// Bad run configuration; raised before any work starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Transport or protocol failure talking to a chat-completion endpoint.
class ProviderError : public Error {
 public:
  explicit ProviderError(const std::string& what) : Error("provider", what) {}
};

}  // namespace tripletalign
