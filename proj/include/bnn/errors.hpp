#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bnn {

/// Inputs whose shapes disagree (parameter length vs architecture, row counts, ...).
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller broke a documented precondition (stale anchor, unreachable thin target, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A numerical run produced a non-finite value.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t iteration)
      : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace bnn
