#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dpbalance {

// Base for every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A privacy loss was negative or otherwise not a valid epsilon.
class InvalidEpsilon : public Error {
 public:
  using Error::Error;
};

// A charge would push consumed loss past the block budget.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

// A demand references a block that does not exist or is retired.
class UnknownBlock : public Error {
 public:
  using Error::Error;
};

// A demand vector with no positive entry where one is required.
class EmptyDemand : public Error {
 public:
  using Error::Error;
};

// Pipelines from different analysts were aggregated together.
class MixedOwnership : public Error {
 public:
  using Error::Error;
};

// A utility passed to a fairness computation was zero or negative.
class DegenerateShare : public Error {
 public:
  using Error::Error;
};

// Solver failed to reach the requested KKT tolerance. Carries the best
// iterate found so far and its residual so callers can inspect it.
class SolverDiverged : public Error {
 public:
  SolverDiverged(const std::string& what, std::vector<double> best, double residual)
      : Error(what), best_iterate(std::move(best)), best_residual(residual) {}

  std::vector<double> best_iterate;
  double best_residual = 0.0;
};

// A pipeline selection that cannot be scaled to x >= 1 within the grant.
class InfeasibleSelection : public Error {
 public:
  using Error::Error;
};

// Granted/consumed/returned bookkeeping failed to reconcile.
class AccountingError : public Error {
 public:
  using Error::Error;
};

// A scheduler round failed; message carries the round context.
class SchedulerError : public Error {
 public:
  using Error::Error;
};

// run() called with a non-positive round count.
class InvalidRounds : public Error {
 public:
  using Error::Error;
};

// Config or input file failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dpbalance
