#pragma once

#include <stdexcept>
#include <string>

namespace heatplan {

/// Invalid parameters, specs or configuration. Raised before any simulation runs.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// API misuse, e.g. stepping an episode that already finished.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Non-finite or out-of-range numbers appearing at runtime.
class NumericFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace heatplan
