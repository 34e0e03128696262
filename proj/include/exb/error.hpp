#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace exb {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite or malformed numeric input.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of the operation (t <= 0, r <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Parameters violate a hypothesis the construction depends on.
class ParameterError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A structural assumption of the operator was violated at run time (c > 0 sampled).
class AssumptionViolation : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A sampled inequality failed. `point` holds the offending coordinates
// (space followed by time, where applicable).
class CertificationFailure : public Error {
 public:
  CertificationFailure(const std::string& what, std::vector<double> point, double lhs, double rhs)
      : Error(what), point_(std::move(point)), lhs_(lhs), rhs_(rhs) {}

  const std::vector<double>& point() const noexcept { return point_; }
  double lhs() const noexcept { return lhs_; }
  double rhs() const noexcept { return rhs_; }

 private:
  std::vector<double> point_;
  double lhs_;
  double rhs_;
};

// Barrier construction found no admissible exponent. `sweep` records
// (|alpha| tried, outcome) pairs; outcome is min h on [0, theta0] or the
// certified eta, whichever failed.
class ConstructionFailure : public Error {
 public:
  struct Probe {
    double alpha;
    double value;
  };

  ConstructionFailure(const std::string& what, std::vector<Probe> sweep)
      : Error(what), sweep_(std::move(sweep)) {}

  const std::vector<Probe>& sweep() const noexcept { return sweep_; }

 private:
  std::vector<Probe> sweep_;
};

}  // namespace exb
