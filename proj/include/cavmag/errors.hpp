#pragma once

#include <stdexcept>
#include <string>

namespace cavmag {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model, cavity or run parameters.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Hilbert space would exceed the configured dimension ceiling.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Vector length does not match the basis dimension.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Iterative procedure stopped before reaching its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double best_residual)
      : Error(what), best_residual_(best_residual) {}
  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

/// Zero-temperature filling is ambiguous at the Fermi level.
class FermiDegeneracyError : public Error {
 public:
  using Error::Error;
};

/// Bisection bracket does not enclose a sign change.
class BracketError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cavmag
