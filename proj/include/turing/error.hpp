#pragma once

#include <stdexcept>
#include <string>

namespace turing {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Array or matrix dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Node id or other index outside its valid range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

class NoEquilibriumError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A feature could not be extracted, e.g. a homogeneous pattern or an empty histogram.
class DegenerateFeatureError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// An iterative training procedure did not reach its tolerance.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Malformed file, flag or configuration value.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace turing
