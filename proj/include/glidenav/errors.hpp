#pragma once

#include <stdexcept>
#include <string>

namespace glidenav {

/// Base class for all library errors. `exit_code()` is what the CLI returns.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class SchemaMismatch : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class DivergenceError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

/// Pitch too close to +-90 deg for an Euler-angle parametrization.
class GimbalProximity : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

/// Mass matrix not safely invertible.
class SingularMass : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace glidenav
