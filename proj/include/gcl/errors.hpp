#pragma once

#include <stdexcept>
#include <string>

namespace gcl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes or lengths do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A vector that must have positive norm has norm zero.
class DegenerateVectorError : public Error {
 public:
  using Error::Error;
};

/// |target cosine| too close to 1 for the injection weight to be finite.
class TargetDegenerateError : public Error {
 public:
  using Error::Error;
};

/// Finite-difference oracle saw a non-finite function value.
class OracleError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition (empty positive set, stale trace...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gcl
