#pragma once

#include <map>
#include <vector>

#include "dpbalance/metrics.hpp"
#include "dpbalance/workload.hpp"

namespace dpbalance {

// Continuous allocation instance: m analysts competing for K blocks.
// Row i of gamma is analyst i's normalized demand; weight[i] is
// T(t_i) * l_i. Block k admits total weighted share capacity[k].
struct AllocationProblem {
  std::vector<double> mu;                  // m entries, > 0
  std::vector<double> weight;              // m entries, > 0
  std::vector<std::vector<double>> gamma;  // m x K, >= 0, each row nonzero
  std::vector<double> capacity;            // K entries, in (0, 1]

  std::size_t analysts() const { return mu.size(); }
  std::size_t blocks() const { return capacity.size(); }
};

struct SolverOptions {
  double tol = 1e-8;     // scaled KKT residual target
  int max_iter = 10000;  // projected-gradient iteration cap
  double armijo = 1e-4;  // sufficient-increase coefficient
  double step_min = 1e-14;
  double step_max = 1e14;
};

// Result of the analyst-level allocation.
struct AnalystAllocation {
  std::vector<double> x;                    // per-analyst scale, >= 0
  std::vector<std::vector<double>> shares;  // gamma_ik * x_i * weight_i
  std::vector<double> multipliers;          // per-block, >= 0
  double objective = 0.0;                   // alpha-fairness objective value
  double phi = 0.0;                         // log-domain utility actually maximized
  double kkt = 0.0;                         // scaled residual at exit
  int iterations = 0;
  // Log-domain objective per accepted iterate; non-decreasing, and the
  // alpha-fairness objective is a monotone transform of it.
  std::vector<double> trace;
};

// Maximizes the platform utility over the capacity polytope with projected
// gradient ascent (spectral steps, Armijo backtracking, Dykstra projection)
// and, in the alpha-fairness regime, a projected-Newton finisher on the
// dual that certifies the KKT residual. Deterministic for fixed inputs.
AnalystAllocation solve_allocation(const AllocationProblem& problem, const FairnessParams& params,
                                   const SolverOptions& options = {});

// Single-resource closed form: gammas is the shared-block demand, mus the
// dominant shares, a the T*l weights. Capacity 1. Returns x with
// sum_i gammas[i] * a[i] * x[i] = 1.
std::vector<double> closed_form_single_resource(const std::vector<double>& gammas,
                                                const std::vector<double>& mus,
                                                const std::vector<double>& a, double beta);

// Stationarity gap of the alpha-fairness first-order conditions plus the
// worst complementary-slackness violation, both unnormalized. Zero at an
// exact optimum.
double kkt_residual(const AnalystAllocation& allocation, const AllocationProblem& problem,
                    const FairnessParams& params);

// Alpha-fairness objective of a feasible point (for oracles and reports).
double alpha_objective_of(const AllocationProblem& problem, const std::vector<double>& x,
                          double beta);

// Log-domain platform utility of a feasible point.
double phi_of(const AllocationProblem& problem, const std::vector<double>& x,
              const FairnessParams& params);

// Demand-level adapter: builds the dense instance over the demanded blocks
// and keeps the ordering used, so shares can be mapped back to block ids.
// Analysts with no positive demand are excluded and reported with x = 0.
struct Sub1Result {
  std::vector<AnalystId> analyst_order;
  std::vector<BlockId> block_order;
  AllocationProblem problem;
  AnalystAllocation allocation;
  std::map<AnalystId, double> x;  // includes excluded analysts at 0
};

Sub1Result solve_subproblem1(const std::vector<AnalystDemand>& analysts,
                             const FairnessParams& params,
                             const std::map<BlockId, double>& capacities,
                             const SolverOptions& options = {});

}  // namespace dpbalance
