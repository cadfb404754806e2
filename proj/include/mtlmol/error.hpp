#pragma once

#include <stdexcept>
#include <string>

namespace mtlmol {

// Base of every error thrown by the library. `kind()` is a stable short
// identifier used by the CLI to map failures onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

// Malformed input files, bad tables, missing molecules.
class DataError : public Error {
 public:
  using Error::Error;
};

// Shape mismatches, non-finite values, domain violations.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Bad configuration / flag combinations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace mtlmol
