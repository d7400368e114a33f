#pragma once

#include <stdexcept>
#include <string>

namespace fdblowup {

/// Input outside the admissible range of an operation (bad parameter, bad node, bad sample).
class DomainError : public std::invalid_argument {
 public:
  explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

/// Floating-point breakdown during a computation: NaN, overflow, non-convergence.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fdblowup
