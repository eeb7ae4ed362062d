#pragma once

#include <stdexcept>
#include <string>

namespace lrsdp {

/// Thrown when a caller breaks an operation's precondition (bad dimensions,
/// out-of-range parameters, malformed indices).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical routine cannot produce a trustworthy answer.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateRankError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace detail
}  // namespace lrsdp
