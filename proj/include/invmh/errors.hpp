#pragma once

#include <stdexcept>
#include <string>

namespace invmh {

/// Invalid construction parameters or mismatched dimensions.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An integrator produced a non-finite state.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A fixed-point solve for an implicit step did not converge.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// A sampler could not produce a draw (e.g. rejection-sampler attempt cap).
class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace invmh
