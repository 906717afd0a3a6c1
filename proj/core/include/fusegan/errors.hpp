#pragma once

#include <stdexcept>
#include <string>

namespace fusegan {

// Error taxonomy, mapped onto CLI exit codes by the tools layer:
// invalid input / config -> 2, numerical abort -> 3, refusal to overwrite -> 4.
struct InvalidInputError : std::runtime_error {
  explicit InvalidInputError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : InvalidInputError {
  explicit ShapeError(const std::string& msg) : InvalidInputError(msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ContractViolation : std::logic_error {
  explicit ContractViolation(const std::string& msg) : std::logic_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fusegan
