#pragma once

#include <map>
#include <string>
#include <vector>

#include "dpbalance/analyst_solver.hpp"
#include "dpbalance/metrics.hpp"
#include "dpbalance/pipeline_packer.hpp"
#include "dpbalance/workload.hpp"

namespace dpbalance {

enum class SchedulerKind { DPBalance, DPF, DPK, FCFS };

SchedulerKind scheduler_from_name(const std::string& name);
std::string scheduler_name(SchedulerKind kind);

struct AnalystOutcome {
  double x = 0.0;                      // analyst-level scale (DPBalance only)
  std::map<BlockId, double> granted;   // physical per-block fractions
  std::map<BlockId, double> consumed;  // physically charged fractions
  std::map<BlockId, double> returned;  // granted - consumed
  double weight = 1.0;                 // T(t_i) * l_i at this round
  double utility = 0.0;                // weight * max_k consumed
};

// The round's final allocation: per-analyst bookkeeping plus the scale of
// every granted pipeline.
struct AllocationPlan {
  int round = 0;
  std::map<AnalystId, AnalystOutcome> per_analyst;
  std::map<PipelineId, double> per_pipeline;  // granted pipelines, kappa >= 1
  int pipelines_allocated = 0;
  double pipeline_units = 0.0;  // sum of kappa

  std::vector<double> utilities() const;
};

// One DPBalance round over the pending pipelines: aggregate analyst
// demands, split capacity with the continuous solver, then pack, scale,
// and return within each analyst. Does not mutate the ledger.
AllocationPlan dpbalance_round(const Ledger& ledger, const std::vector<PipelineDemand>& pending,
                               int round, const FairnessParams& params,
                               const SolverOptions& options = {});

// Baselines grant whole pipelines at scale one, greedily.
AllocationPlan dpf_round(const Ledger& ledger, const std::vector<PipelineDemand>& pending,
                         int round, double rho = 0.0);
AllocationPlan dpk_round(const Ledger& ledger, const std::vector<PipelineDemand>& pending,
                         int round, double rho = 0.0);
AllocationPlan fcfs_round(const Ledger& ledger, const std::vector<PipelineDemand>& pending,
                          int round, double rho = 0.0);

AllocationPlan run_scheduler(SchedulerKind kind, const Ledger& ledger,
                             const std::vector<PipelineDemand>& pending, int round,
                             const FairnessParams& params, const SolverOptions& options = {});

}  // namespace dpbalance
