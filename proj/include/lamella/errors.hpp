#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lamella {

/// Input outside the mathematical domain of an operation (non-finite entries,
/// non-unit normals, phase values outside [0, 1], ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid solver or estimator configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed to converge. Carries the best value reached
/// and, where available, the iterate history.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double best_value, std::vector<double> log = {})
      : std::runtime_error(what), best_value_(best_value), log_(std::move(log)) {}

  double best_value() const noexcept { return best_value_; }
  const std::vector<double>& log() const noexcept { return log_; }

 private:
  double best_value_;
  std::vector<double> log_;
};

/// sup|u| grew past the configured bound during an evolution.
class BoundExceeded : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// An internal invariant was broken (e.g. energy increased inside a descent loop).
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Schema violations collected over a whole config document.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out = "invalid config:";
    for (const auto& issue : issues) out += "\n  " + issue;
    return out;
  }

  std::vector<std::string> issues_;
};

}  // namespace lamella
