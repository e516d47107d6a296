#pragma once

#include <stdexcept>
#include <string>

namespace cleartrade {

// Error taxonomy. The CLI maps each family onto a distinct exit code.

/// Invalid architecture, config key, palette or other static setup.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed, missing or insufficient input data (CSV, checkpoint, history span).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An API called with arguments that violate its preconditions.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace cleartrade
