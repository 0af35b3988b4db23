#pragma once

#include <stdexcept>
#include <string>

namespace affrig {

// Base for every diagnostic raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// y = 0: the point is not on the slit tangent bundle.
class SlitViolation : public Error {
 public:
  using Error::Error;
};

class OutsideChart : public Error {
 public:
  using Error::Error;
};

// Fundamental tensor not positive definite (or numerically singular).
class MetricDegenerate : public Error {
 public:
  using Error::Error;
};

// An integral curve left the chart domain.
class ChartExit : public Error {
 public:
  ChartExit(const std::string& what, double exit_time) : Error(what), exit_time_(exit_time) {}
  double exit_time() const { return exit_time_; }

 private:
  double exit_time_;
};

class StepLimit : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

// A result that is impossible in exact arithmetic, e.g. 2n independent vectors in D^h.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class InsufficientSamples : public Error {
 public:
  using Error::Error;
};

}  // namespace affrig
