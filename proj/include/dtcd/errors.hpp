#ifndef DTCD_ERRORS_HPP
#define DTCD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dtcd {

/// Invalid configuration value or unknown key. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or raster geometry violates an operation's contract.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation would exceed a configured memory budget.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data is missing, corrupt or inconsistent with its manifest. Exit code 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values encountered during training. Exit code 4.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dtcd

#endif  // DTCD_ERRORS_HPP
