#pragma once

#include <stdexcept>
#include <string>

namespace boil {

// Bad arguments or malformed configs. CLI maps this to exit code 2.
struct InvalidInput : std::invalid_argument {
  explicit InvalidInput(const std::string& msg) : std::invalid_argument(msg) {}
};

// Factorization / conditioning failures that survived the jitter policy.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Objective evaluation failed (bad child process, protocol violation, timeout).
struct ObjectiveError : std::runtime_error {
  explicit ObjectiveError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace boil
