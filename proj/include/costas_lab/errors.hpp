#pragma once

#include <stdexcept>
#include <string>

namespace costas {

/// Invalid construction parameter (non-positive bandwidth, bad time constant, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Caller broke a precondition: mismatched state layout, wrong model kind.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Numerical integration failed. `last_good_time` is the last time at which
/// the state was finite and accepted.
class IntegrationError : public std::runtime_error {
 public:
  enum class Kind { divergence, step_underflow };

  IntegrationError(Kind kind, double last_good_time, const std::string& what)
      : std::runtime_error(what), kind_(kind), last_good_time_(last_good_time) {}

  [[nodiscard]] Kind kind() const noexcept { return kind_; }
  [[nodiscard]] double last_good_time() const noexcept { return last_good_time_; }

 private:
  Kind kind_;
  double last_good_time_;
};

/// Trajectory too short for the requested statistic.
class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace costas
