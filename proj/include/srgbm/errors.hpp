#pragma once

#include <stdexcept>
#include <string>

namespace srgbm {

// Error taxonomy shared by all modules. The CLI maps these onto exit codes:
// DomainError/ValidationError -> 2, DivergenceError/NumericalError -> 3,
// FitError -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs outside the documented domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Bad file contents or malformed configuration.
class ValidationError : public DomainError {
 public:
  using DomainError::DomainError;
};

// A requested quantity is infinite (e.g. MFPT without resetting and weak
// drift) or a required stationary state does not exist.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Numerical failure: singular solve, non-normalizable density, exhausted
// rejection loop.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Too many censored trajectories for a trustworthy point estimate.
class CensoringError : public NumericalError {
 public:
  CensoringError(const std::string& msg, double censored_fraction)
      : NumericalError(msg), censored_fraction(censored_fraction) {}
  double censored_fraction;
};

// Parameter search could not produce a usable fit.
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace srgbm
