#ifndef EXCLUST_ERROR_HPP
#define EXCLUST_ERROR_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace exclust {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A model, threshold or option specification violates its invariants.
class InvalidSpec : public Error {
 public:
  using Error::Error;
};

// An estimator was given an empty set of interexceedance times.
class MissingData : public Error {
 public:
  using Error::Error;
};

// No phase class carries any interexceedance time.
class NoExceedances : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

// The bias-corrected intervals estimator has a zero denominator (max T <= 2).
class ZeroDenominator : public DomainError {
 public:
  using DomainError::DomainError;
};

// The conditional sampler failed to invert F(y|x) = U.
class SimulationFailure : public Error {
 public:
  SimulationFailure(std::int64_t step, double x, double u)
      : Error("conditional inversion failed at step " + std::to_string(step) +
              " (x=" + std::to_string(x) + ", U=" + std::to_string(u) + ")"),
        step_(step),
        x_(x),
        u_(u) {}

  std::int64_t step() const noexcept { return step_; }
  double x() const noexcept { return x_; }
  double u() const noexcept { return u_; }

 private:
  std::int64_t step_;
  double x_;
  double u_;
};

}  // namespace exclust

#endif  // EXCLUST_ERROR_HPP
