#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace towerlab {

/// Base class for every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dimension outside the supported range (n >= 4).
struct DimensionError : Error {
  using Error::Error;
};

/// Point or parameter outside the admissible domain.
struct DomainError : Error {
  using Error::Error;
};

struct IndexError : Error {
  using Error::Error;
};

/// Adaptive quadrature ran out of subdivisions. Carries the partial result.
struct BudgetExceeded : Error {
  BudgetExceeded(const std::string& what, double partial_value, double partial_error)
      : Error(what), value(partial_value), error_estimate(partial_error) {}
  double value;
  double error_estimate;
};

/// Linear or nonlinear solver failure. `trace` holds residual norms per iteration.
struct SolverError : Error {
  SolverError(const std::string& what, std::vector<double> residual_trace = {},
              double eps = 0.0)
      : Error(what), trace(std::move(residual_trace)), epsilon(eps) {}
  std::vector<double> trace;
  double epsilon;
};

/// The computed field no longer shows the expected alternating tower.
struct StructureLost : Error {
  using Error::Error;
};

struct IllConditioned : Error {
  using Error::Error;
};

struct ConfigError : Error {
  ConfigError(int line_no, const std::string& what)
      : Error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + what : what),
        line(line_no) {}
  int line;
};

}  // namespace towerlab
