#pragma once

#include <stdexcept>
#include <string>

namespace pgn {

// All errors carry the module they originate from; what() is a single line
// "<module>: <message>" suitable for machine parsing at the CLI boundary.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message), module_(std::move(module)) {}

  const std::string& module() const { return module_; }

 private:
  std::string module_;
};

struct DimensionError : Error {
  using Error::Error;
};

struct SpecError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct ContractError : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

struct AccessPolicyError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct TrainingError : Error {
  using Error::Error;
};

}  // namespace pgn
