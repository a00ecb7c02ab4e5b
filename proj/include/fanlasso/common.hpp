#pragma once

#include <stdexcept>
#include <string>

namespace fanlasso {

// Error taxonomy used across the library. The CLI maps these onto process
// exit codes, so new failure modes should reuse one of the three.

// Bad arguments, shapes, or configuration values. CLI exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Malformed or unusable input data (CSV parse failures, bad model files).
// CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: an iteration cap was hit or a computation left its
// domain. CLI exit code 4.
class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fanlasso
