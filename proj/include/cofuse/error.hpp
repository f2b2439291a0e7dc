#pragma once

#include <stdexcept>
#include <string>

namespace cofuse {

/// Base of every error thrown by the library. The CLI maps each subclass to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated precondition: bad sizes, out-of-range parameters, degenerate input.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// File system or codec failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Unknown key, out-of-range value or missing path in a configuration file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown (non-finite values, singular systems).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace cofuse
