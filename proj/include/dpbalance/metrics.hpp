#pragma once

#include <vector>

#include "dpbalance/errors.hpp"

namespace dpbalance {

// Platform preferences. beta is the fairness preference (> 0, != 1),
// lambda the efficiency preference (>= 0), rho the waiting-decay rate.
// When lambda is left unset it defaults to |1 - beta| / beta, the regime
// in which the platform utility reduces to the alpha-fairness objective.
struct FairnessParams {
  double beta;
  double lambda;
  double rho;

  explicit FairnessParams(double beta_, double lambda_ = -1.0, double rho_ = 0.0);

  // True when lambda equals |1 - beta| / beta within 1e-12.
  bool alpha_fair() const;
};

// Per-round metric row. Cumulative fields are exact prefix sums of the
// round fields.
struct RoundMetrics {
  int round = 0;
  double round_efficiency = 0.0;
  double round_fairness = 0.0;
  double cumulative_efficiency = 0.0;
  double cumulative_fairness = 0.0;
  int pipelines_allocated = 0;
  double pipeline_units = 0.0;  // sum of pipeline scales
  int blocks_retired = 0;       // newly retired this round
  bool active = true;           // false when no analyst had utility
};

class MetricSeries {
 public:
  // Fills in the cumulative fields from the previous row.
  void append(RoundMetrics row);

  const std::vector<RoundMetrics>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }
  const RoundMetrics& back() const { return rows_.back(); }

 private:
  std::vector<RoundMetrics> rows_;
};

// T(t) = exp(-rho * t): 1 at t = 0, strictly decreasing when rho > 0.
double waiting_coeff(int waiting_rounds, double rho);

// U_i = mu * x * T * l.
double analyst_efficiency(double mu, double x, double waiting, double loss);

// Sum of analyst utilities.
double dominant_efficiency(const std::vector<double>& utilities);

// sgn(1-beta) * (sum_i (U_i / sum U)^(1-beta))^(1/beta). All utilities
// must be strictly positive; callers filter zero-utility analysts first.
double dominant_fairness(const std::vector<double>& utilities, double beta);

// f_beta(U) * (sum U)^lambda.
double platform_utility(const std::vector<double>& utilities, const FairnessParams& params);

// sum_i U_i^(1-beta) / (1-beta).
double alpha_objective(const std::vector<double>& utilities, double beta);

}  // namespace dpbalance
