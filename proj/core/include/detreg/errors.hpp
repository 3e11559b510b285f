#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace detreg {

/// Base class of every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A matrix required to have full column rank does not, at the active tolerance.
struct RankDeficient : Error {
  using Error::Error;
};

/// The projected kernel has an eigenvalue below the admissible slack.
struct NotConditionallyPsd : Error {
  NotConditionallyPsd(const std::string& what, double min_eigenvalue)
      : Error(what), min_eigenvalue(min_eigenvalue) {}
  double min_eigenvalue;
};

/// A linear system (saddle, reduced or Cholesky target) is singular at tolerance.
struct SingularSystem : Error {
  using Error::Error;
};

/// Requested subset size outside the feasible range of the sampler.
struct InfeasibleSize : Error {
  using Error::Error;
};

/// Problem too large for exhaustive enumeration.
struct TooLarge : Error {
  using Error::Error;
};

/// Iterative solver exhausted its iteration budget.
struct NoConvergence : Error {
  NoConvergence(const std::string& what, double residual)
      : Error(what), residual(residual) {}
  double residual;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

/// Invalid argument value (bandwidth, regularity, coordinate mask, ...).
struct InvalidArgument : Error {
  using Error::Error;
};

/// Malformed CSV input; positions are 1-based.
struct ParseError : Error {
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(what), line(line), column(column) {}
  std::size_t line;
  std::size_t column;
};

/// A value in a data file is NaN or infinite.
struct NonFiniteValue : Error {
  using Error::Error;
};

/// Bad experiment or CLI configuration; message names the offending field.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace detreg
