#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qswld {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text. Carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Index outside its admissible range (negative or overflowing node ids).
class RangeError : public Error {
 public:
  using Error::Error;
};

// Parameter outside its mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Shape or size mismatch between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Base for failures of a numerical procedure.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Iterative method hit its cap. Carries the residual at exit.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, std::size_t iterations, double residual)
      : NumericalError(what + " (iterations=" + std::to_string(iterations) +
                       ", residual=" + std::to_string(residual) + ")"),
        iterations_(iterations),
        residual_(residual) {}
  std::size_t iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  std::size_t iterations_;
  double residual_;
};

// Non-finite or growing values during integration.
class DivergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Zero eigenvalue of the wrong multiplicity: the dynamics does not relax to a
// unique stationary state.
class DegeneracyError : public NumericalError {
 public:
  DegeneracyError(const std::string& what, std::size_t multiplicity)
      : NumericalError(what + " (zero-eigenvalue multiplicity=" + std::to_string(multiplicity) + ")"),
        multiplicity_(multiplicity) {}
  std::size_t multiplicity() const noexcept { return multiplicity_; }

 private:
  std::size_t multiplicity_;
};

// A quantity that is mathematically undefined at the requested point, e.g.
// normalizing a vanishing activity vector.
class UndefinedError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Trajectory model admits norm growth between jumps.
class ModelError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace qswld
