#pragma once

#include <stdexcept>
#include <string>

namespace ngrc {

/// Dimension or parameter mismatch in a feature or model configuration.
class ConfigurationError : public std::invalid_argument {
 public:
  explicit ConfigurationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Ridge training could not produce a usable model.
class TrainingError : public std::runtime_error {
 public:
  explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

/// Input outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// A plant state that is non-finite or has left the bounded region.
class EscapedStateError : public std::runtime_error {
 public:
  explicit EscapedStateError(const std::string& what) : std::runtime_error(what) {}
};

/// The control effectiveness estimate cannot be inverted.
class ControlError : public std::runtime_error {
 public:
  explicit ControlError(const std::string& what) : std::runtime_error(what) {}
};

/// Dataset generation gave up after exhausting its retries.
class GenerationError : public std::runtime_error {
 public:
  explicit GenerationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ngrc
