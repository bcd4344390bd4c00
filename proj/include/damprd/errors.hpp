#pragma once

#include <stdexcept>
#include <string>

namespace damprd {

/// Root of every error thrown by the library.  Callers that only care about
/// "something went wrong in module X" can catch this and print what().
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition of an operation was violated by its input.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

/// Newton iteration hit its cap; carries the last max-norm mismatch.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double mismatch, int iterations)
      : Error(what), mismatch_(mismatch), iterations_(iterations) {}
  double mismatch() const noexcept { return mismatch_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double mismatch_;
  int iterations_;
};

class ReductionError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ClassificationError : public Error {
 public:
  using Error::Error;
};

class TrackingError : public Error {
 public:
  using Error::Error;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public Error {
 public:
  SingularityError(const std::string& what, double condition)
      : Error(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

class OrderingError : public Error {
 public:
  using Error::Error;
};

class FeatureReductionError : public Error {
 public:
  using Error::Error;
};

class BuildError : public Error {
 public:
  using Error::Error;
};

class RedistributionError : public Error {
 public:
  using Error::Error;
};

/// Text input error.  line/column are 1-based; column 0 means "whole line".
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line, int column = 0)
      : Error(what), line_(line), column_(column) {}
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace damprd
