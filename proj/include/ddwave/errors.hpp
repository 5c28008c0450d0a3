#pragma once

#include <stdexcept>
#include <string>

namespace ddwave {

/// Invalid user-supplied configuration: bad physical constants, dimension
/// mismatches, malformed experiment files. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure: singular covariance, eigensolver breakdown, broken
/// sensitivity construction. Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ddwave
