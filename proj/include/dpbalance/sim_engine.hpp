#pragma once

#include <map>
#include <set>
#include <vector>

#include "dpbalance/metrics.hpp"
#include "dpbalance/schedulers.hpp"
#include "dpbalance/workload.hpp"

namespace dpbalance {

// Mutable state of one deterministic simulation. The clock counts
// completed rounds; rounds are 1-based in every output.
struct SimulationState {
  Ledger ledger;
  std::vector<PipelineDemand> pending;
  int clock = 0;
  WorkloadConfig config;

  // Audit trail: physical eps charged per block, accumulated in charge
  // order so it reconciles exactly with the ledger.
  std::map<BlockId, double> charged;
  // Blocks that were retired at plan time yet appeared in a plan; must
  // stay empty for every scheduler.
  std::set<BlockId> retired_grants;
};

// Everything one run needs.
struct SimulationSpec {
  WorkloadConfig workload;
  double beta = 2.2;
  double lambda = -1.0;  // negative -> |1-beta|/beta
  double rho = 0.0;
  SchedulerKind scheduler = SchedulerKind::DPBalance;
  int rounds = 10;
};

SimulationState make_state(const WorkloadConfig& config);

// Solver settings for embedded round solves. Workload instances carry
// 1e2..1e17 gradient ranges at large beta, where the standalone 1e-8
// relative target can sit just past the floating-point plateau; 1e-6 is
// far tighter than anything the round outcome can resolve.
inline SolverOptions sim_solver_options() {
  SolverOptions options;
  options.tol = 1e-6;
  return options;
}

// Executes one round: fresh blocks, Poisson arrivals, scheduling, ledger
// charging, pending updates, retirement, and the round's metrics.
RoundMetrics step_round(SimulationState& state, SchedulerKind scheduler,
                        const FairnessParams& params,
                        const SolverOptions& options = sim_solver_options());

MetricSeries run(const SimulationSpec& spec, const SolverOptions& options = sim_solver_options());

// Independent runs per beta from identical seeds. jobs > 1 runs them on
// that many threads; output order follows the betas argument either way.
std::vector<std::pair<double, MetricSeries>> sweep_beta(const SimulationSpec& spec,
                                                        const std::vector<double>& betas,
                                                        int jobs = 1);

// True when every block's accumulated charges equal its consumed budget
// bit-for-bit and no plan ever touched a retired block.
bool audit_conservation(const SimulationState& state);

}  // namespace dpbalance
