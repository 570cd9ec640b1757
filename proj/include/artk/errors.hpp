#pragma once

#include <stdexcept>
#include <string>

namespace artk {

// Caller broke a documented contract (shape mismatch, index out of range, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// An operation's precondition on its *data* does not hold, e.g. attacking a
// sample the model already misclassifies.
class PreconditionError : public ContractViolation {
 public:
  using ContractViolation::ContractViolation;
};

// NaN or Inf produced somewhere. `where()` names the op that produced it.
class NumericError : public std::runtime_error {
 public:
  NumericError(std::string where, std::string detail)
      : std::runtime_error(where + ": " + detail), where_(std::move(where)), detail_(std::move(detail)) {}
  const std::string& where() const noexcept { return where_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string where_;
  std::string detail_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace artk
