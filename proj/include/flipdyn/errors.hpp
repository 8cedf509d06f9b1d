#pragma once

#include <stdexcept>
#include <string>

namespace flipdyn {

// Base class for every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid user-supplied configuration or arguments.
struct ConfigError : Error {
  using Error::Error;
};

// Vector/matrix dimensions of model pieces do not agree.
struct DimensionError : ConfigError {
  using ConfigError::ConfigError;
};

// A 2x2 stage game has no pure saddle point and the mixed-form denominator
// vanishes, so no equalizing solution exists.  When raised from a value
// recursion, `step` and `state` identify the offending cell (-1 otherwise).
struct DegenerateGameError : Error {
  explicit DegenerateGameError(const std::string& msg, int step_in = -1,
                               int state_in = -1)
      : Error(msg), step(step_in), state(state_in) {}
  int step;
  int state;
};

// solve_mixed was called on a matrix that admits a pure saddle point.
struct PureSaddleExistsError : Error {
  using Error::Error;
};

// A value recursion left its validity region in strict mode.  `step` is the
// first failing step encountered (recursions run backward, so the largest k).
struct ValidityError : Error {
  explicit ValidityError(const std::string& msg, int step_in)
      : Error(msg), step(step_in) {}
  int step;
};

// A policy or value was requested at a step whose validity flag is false.
struct InvalidStepError : Error {
  using Error::Error;
};

// A matrix that must be inverted is numerically singular or ill conditioned.
struct SingularMatrixError : Error {
  using Error::Error;
};

// A state-dependent mixed policy was requested at x = 0, where the defining
// ratio of quadratic forms is undefined.
struct ZeroStateError : Error {
  using Error::Error;
};

// A fixed-point iteration hit its iteration cap before reaching tolerance.
struct ConvergenceError : Error {
  explicit ConvergenceError(const std::string& msg, double residual_in)
      : Error(msg), residual(residual_in) {}
  double residual;
};

// A state enumeration is not closed under the game dynamics.
struct EnumerationError : Error {
  using Error::Error;
};

// A tree evaluation was asked for a horizon beyond its hard cap.
struct HorizonCapError : Error {
  using Error::Error;
};

// Filesystem or serialization failure while writing results.
struct IoError : Error {
  using Error::Error;
};

}  // namespace flipdyn
