#pragma once

#include <stdexcept>
#include <string>

namespace qforge {

// Base exception for every failure raised by the library. `code` is a short
// machine-readable token ("parse_error", "unknown_relation", ...) that the
// HTTP layer forwards verbatim as {"error": code}.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& detail)
      : std::runtime_error(detail), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

// Configuration invariant violation; `field` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& detail)
      : Error("config_error", field + ": " + detail), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace qforge
