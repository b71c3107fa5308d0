#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpbalance/analyst_solver.hpp"
#include "dpbalance/rng.hpp"

namespace dpbalance {

struct PropertyViolation {
  std::uint64_t seed = 0;
  std::string witness;          // what was compared
  std::vector<double> values;   // the numbers behind the inequality
};

struct PropertyReport {
  std::string property;
  double beta = 0.0;
  double lambda = 0.0;
  int instances_tested = 0;
  std::vector<PropertyViolation> violations;

  bool holds() const { return violations.empty(); }
};

// Pareto efficiency oracle: exact per-coordinate headroom plus the
// requested number of random dominating perturbations. Any feasible
// dominating point is a violation witness.
PropertyReport check_pareto(const AllocationProblem& problem, const AnalystAllocation& allocation,
                            const FairnessParams& params, std::uint64_t seed,
                            int random_probes = 10000);

// Sharing incentive: every weighted dominant share reaches the 1/m equal
// split, up to the oracle tolerance.
PropertyReport check_sharing_incentive(const AllocationProblem& problem,
                                       const AnalystAllocation& allocation,
                                       const FairnessParams& params, std::uint64_t seed);

// Envy-freeness: scaling any other analyst's granted bundle onto one's
// own demand profile never beats one's own allocation.
PropertyReport check_envy_freeness(const AllocationProblem& problem,
                                   const AnalystAllocation& allocation,
                                   const FairnessParams& params, std::uint64_t seed);

// Closed-form single-resource shares used by the strategy-proofness probe.
struct SpShares {
  double dominant = 0.0;
  double non_dominant = 0.0;
};
SpShares sp_shares(const std::vector<double>& gammas, const std::vector<double>& mus,
                   const std::vector<double>& a, double beta, std::size_t analyst);

// Probes the three canonical lies of one analyst on a single-resource
// instance: inflate the dominant share, inflate the non-dominant share,
// inflate both in proportion. In the beta > 1 regime the expected pattern
// is dominant up / non-dominant down under the first lie and exact
// invariance under the proportional lie.
PropertyReport check_strategy_proofness(const std::vector<double>& gammas,
                                        const std::vector<double>& mus,
                                        const std::vector<double>& a, double beta, double eta,
                                        std::uint64_t seed);

struct TradeoffPoint {
  double beta = 0.0;
  double efficiency = 0.0;
  double fairness_abs = 0.0;
};

// Solves the same instance across betas with the default beta/lambda
// coupling and reports efficiency and |fairness| per beta.
std::vector<TradeoffPoint> tradeoff_sweep(const AllocationProblem& problem,
                                          const std::vector<double>& betas,
                                          const SolverOptions& options = {});

// Named instances.
AllocationProblem fig2_problem();
// All-tight, equal-share instance: per-block sum of gamma/mu is constant.
AllocationProblem no_tradeoff_equal_instance();
// Single block, two analysts whose pipelines cannot both reach unit scale;
// built as a workload fixture because the zeroing happens in packing.
Fixture no_tradeoff_zero_fixture();

// Random instance for the property batches: 2-4 analysts, 1-3 blocks,
// fresh unit capacities; unit weights keep bundle comparisons exact.
AllocationProblem random_property_instance(Rng& rng, bool unit_weights);

// Batch driver behind the CLI and the acceptance suite. Regimes:
//   thm1 / thm2a / thm3a / thm4a: properties hold at beta in {1.5, 2.2, 5}
//   thm2b / thm3b / thm4b: violations at beta = 0.5
//   thm3d: envy under an efficiency-only objective (huge lambda)
//   thm6 / thm7: the two no-tradeoff scenarios at beta = 50
// One report per (property, beta) pair.
std::vector<PropertyReport> run_property_regime(const std::string& regime, int instances,
                                                std::uint64_t seed,
                                                const SolverOptions& options = {});

}  // namespace dpbalance
