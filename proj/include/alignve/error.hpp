#pragma once

#include <stdexcept>
#include <string>

namespace alignve {

// Base of every error the library throws. The CLI maps the subclasses
// onto exit codes (see cli.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or parameter shapes disagree with an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or missing input files and invalid dataset contents.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, failed gradient checks.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace alignve
