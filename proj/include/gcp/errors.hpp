#pragma once

#include <stdexcept>
#include <string>

namespace gcp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed request: bad enum, bad index, bad configuration.
class UsageError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double achieved_tolerance = 0.0,
                 long step = -1)
      : Error(what), achieved_tolerance_(achieved_tolerance), step_(step) {}

  double achieved_tolerance() const { return achieved_tolerance_; }
  // Step index at which a simulation failed, or -1.
  long step() const { return step_; }

 private:
  double achieved_tolerance_;
  long step_;
};

}  // namespace gcp
