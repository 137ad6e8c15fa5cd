#pragma once

#include <stdexcept>
#include <string>

namespace adap {

// Invalid configuration, dimension mismatch, unknown names.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss, gradient or parameter.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Checkpoint checksum or format failures.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Illegal action ids, stepping a finished environment.
class EnvironmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace adap
