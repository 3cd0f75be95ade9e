#pragma once

#include <stdexcept>
#include <string>

namespace sdebnn {

/// Violated precondition on shapes, lengths or indices.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation (times, scales).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A solver produced a non-finite state.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(double t, double state_norm)
      : std::runtime_error("integration diverged at t=" + std::to_string(t) +
                           " (state norm " + std::to_string(state_norm) + ")"),
        t_(t),
        state_norm_(state_norm) {}

  double time() const noexcept { return t_; }
  double state_norm() const noexcept { return state_norm_; }

 private:
  double t_;
  double state_norm_;
};

/// Adaptive solver ran out of its step budget.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed binary input; carries the byte offset where parsing failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace sdebnn
