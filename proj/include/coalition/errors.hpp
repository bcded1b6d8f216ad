#pragma once

#include <stdexcept>
#include <string>

namespace coalition {

/// Base for every error raised by the library. `origin()` names the module
/// that rejected the input so the CLI can report it.
class Error : public std::runtime_error {
public:
  Error(std::string origin, const std::string& what)
      : std::runtime_error(origin + ": " + what), origin_(std::move(origin)) {}

  const std::string& origin() const noexcept { return origin_; }

private:
  std::string origin_;
};

/// Malformed or invariant-violating configuration.
class ConfigError : public Error {
public:
  ConfigError(std::string origin, std::string field, const std::string& what)
      : Error(std::move(origin), field.empty() ? what : field + ": " + what),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

/// Stability violations, solver non-convergence and similar numeric failures.
class NumericError : public Error {
public:
  using Error::Error;
};

/// A cross-method comparison did not agree.
class ValidationError : public Error {
public:
  using Error::Error;
};

}  // namespace coalition
