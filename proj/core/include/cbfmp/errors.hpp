#pragma once

#include <stdexcept>
#include <string>

namespace cbfmp {

/// Base class of every typed error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularMatrix : Error {
  using Error::Error;
};
struct NoConvergence : Error {
  using Error::Error;
};
struct NotStabilizing : Error {
  using Error::Error;
};
struct NonFiniteState : Error {
  using Error::Error;
};
struct NonFinite : Error {
  using Error::Error;
};
struct InvalidGamma : Error {
  using Error::Error;
};
struct NegativeMu : Error {
  using Error::Error;
};
struct DegenerateConstraint : Error {
  using Error::Error;
};
struct Infeasible : Error {
  using Error::Error;
};
struct NoRelativeDegree : Error {
  using Error::Error;
};
struct SingularCoordinates : Error {
  using Error::Error;
};
struct DependentColumns : Error {
  using Error::Error;
};
struct InvalidCertificate : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};

/// Wraps an error raised by a control policy during a closed-loop run,
/// carrying the step index at which it occurred.
struct PolicyError : Error {
  PolicyError(std::size_t step_index, const std::string& what_arg)
      : Error("policy error at step " + std::to_string(step_index) + ": " + what_arg),
        step(step_index) {}
  std::size_t step;
};

}  // namespace cbfmp
