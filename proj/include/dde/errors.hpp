#pragma once

#include <stdexcept>
#include <string>

namespace dde {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shape or layout mismatch between objects that must agree (state vs.
/// variant, cache vs. network, inactive rate access).
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or divergence inside the numerical core.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// The initial state cannot be built from the first observation.
class InfeasibleInitError : public DataError {
 public:
  using DataError::DataError;
};

/// Invalid configuration (bad flags, incompatible options).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dde
