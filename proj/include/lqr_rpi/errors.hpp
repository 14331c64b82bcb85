#pragma once

#include <stdexcept>
#include <string>

namespace lqr_rpi {

// Base for every error raised by the library. The CLI maps subclasses onto
// exit codes, so new error kinds should derive from one of these.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// A matrix that must be Hurwitz (or a gain that must be stabilizing) is not.
class StabilityError : public Error {
 public:
  using Error::Error;
};

// Linear solve, eigenvalue or SVD failure.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularBlockError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Simulation produced a non-finite state.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, double time)
      : NumericalError(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

// Model assumption violated (controllability, definiteness, ...).
class ModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace lqr_rpi
