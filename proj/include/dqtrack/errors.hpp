#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace dqtrack {

// Real part of a pose (or a quaternion to be normalized) has vanished.
class DegenerateStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A measured point sits at or behind the depth tolerance.
class PositiveDepthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientMarkersError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Cholesky of the (scaled) covariance failed even after diagonal inflation.
class CovarianceConditioningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InnovationConditioningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The filter could not be initialized from the first frame.
class InitializationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration problem; `field()` is a dotted path such as "schedule[2].start".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace dqtrack
