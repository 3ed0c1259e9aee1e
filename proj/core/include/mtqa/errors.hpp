#pragma once

#include <stdexcept>
#include <string>

namespace mtqa {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file (line-level problems).
struct ParseError : Error {
  using Error::Error;
};

/// Structurally well-formed input that violates data invariants.
struct ValidationError : Error {
  using Error::Error;
};

/// Bad argument to an API call.
struct ArgumentError : Error {
  using Error::Error;
};

/// Schema/label-set violations.
struct SchemaError : Error {
  using Error::Error;
};

/// Template rendering problems (arity mismatch, residual markers).
struct TemplateError : Error {
  using Error::Error;
};

/// Model/parameter shape or checkpoint problems.
struct ModelError : Error {
  using Error::Error;
};

/// Bad generator or training configuration.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace mtqa
