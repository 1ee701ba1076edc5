#pragma once

#include <stdexcept>
#include <string>

namespace nsflows {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The mixture marginal likelihood evaluated to zero in double precision.
class UnderflowError : public Error {
 public:
  using Error::Error;
};

/// Exact transport was asked to solve a problem above its support cap.
class SupportCapError : public Error {
 public:
  using Error::Error;
};

/// Configuration problem; `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  [[nodiscard]] const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace nsflows
