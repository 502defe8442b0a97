#pragma once

#include <stdexcept>
#include <string>

namespace apvqa {

// Bad user input: malformed records, out-of-range coordinates, unknown ids.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters (k, n, fractions, folds, ...).
class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace apvqa
