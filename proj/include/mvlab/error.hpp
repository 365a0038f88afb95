#pragma once

#include <stdexcept>
#include <string>

namespace mvlab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad expression text, bad JSON, violated preconditions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Raised when an expression atom evaluates to a non-finite value.
class EvalError : public Error {
 public:
  EvalError(const std::string& atom, double value)
      : Error("non-finite value " + std::to_string(value) + " for atom " + atom), atom_(atom) {}

  const std::string& atom() const noexcept { return atom_; }

 private:
  std::string atom_;
};

}  // namespace mvlab
