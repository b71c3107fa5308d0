#include "dpbalance/schedulers.hpp"

#include <algorithm>
#include <cmath>

namespace dpbalance {

namespace {

// Pipelines whose demands reference missing or retired blocks, or demand
// more than a block has left, cannot reach unit scale this round; they
// stay pending untouched. Pruning them keeps dead constraints out of the
// round's allocation.
std::vector<PipelineDemand> serviceable(const Ledger& ledger,
                                        const std::vector<PipelineDemand>& pending) {
  std::vector<PipelineDemand> out;
  for (const PipelineDemand& p : pending) {
    bool ok = !p.demands.empty();
    for (const auto& [block, eps] : p.demands) {
      if (!ledger.has_block(block) || ledger.is_retired(block)) {
        ok = false;
        break;
      }
      const PrivacyBlock& b = ledger.block(block);
      if (eps / b.budget_eps > remaining_fraction(b) + 1e-12) {
        ok = false;
        break;
      }
    }
    if (ok) out.push_back(p);
  }
  return out;
}

std::map<AnalystId, std::vector<PipelineDemand>> group_by_analyst(
    const std::vector<PipelineDemand>& pipelines) {
  std::map<AnalystId, std::vector<PipelineDemand>> grouped;
  for (const PipelineDemand& p : pipelines) grouped[p.analyst_id].push_back(p);
  return grouped;
}

double max_entry(const std::map<BlockId, double>& values) {
  double hi = 0.0;
  for (const auto& [id, v] : values) hi = std::max(hi, v);
  return hi;
}

// Greedy baseline: grant pipelines at scale one in `order`, skipping any
// that no longer fit the remaining capacity.
AllocationPlan greedy_round(const Ledger& ledger, std::vector<PipelineDemand> order, int round,
                            double rho) {
  AllocationPlan plan;
  plan.round = round;

  std::map<BlockId, double> remaining;
  for (const auto& [id, block] : ledger.blocks()) {
    const double rem = remaining_fraction(block);
    if (rem > kEpsTol) remaining[id] = rem;
  }

  std::map<AnalystId, std::vector<PipelineDemand>> served;
  for (const PipelineDemand& p : order) {
    const auto gamma = normalize_demand(p, ledger);
    bool fits = true;
    for (const auto& [block, g] : gamma) {
      auto it = remaining.find(block);
      if (it == remaining.end() || g > it->second + 1e-12) {
        fits = false;
        break;
      }
    }
    if (!fits) continue;
    for (const auto& [block, g] : gamma) remaining[block] -= g;
    plan.per_pipeline[p.pipeline_id] = 1.0;
    plan.pipelines_allocated += 1;
    plan.pipeline_units += 1.0;
    served[p.analyst_id].push_back(p);

    AnalystOutcome& outcome = plan.per_analyst[p.analyst_id];
    for (const auto& [block, g] : gamma) {
      outcome.granted[block] += g;
      outcome.consumed[block] += g;
    }
  }

  // Analyst-level waiting/loss weights for the round's utilities.
  for (auto& [analyst_id, outcome] : plan.per_analyst) {
    const AnalystDemand demand = aggregate_analyst(served[analyst_id], round, ledger);
    outcome.weight = waiting_coeff(demand.waiting_time, rho) * demand.loss;
    outcome.utility = outcome.weight * max_entry(outcome.consumed);
  }
  return plan;
}

}  // namespace

SchedulerKind scheduler_from_name(const std::string& name) {
  if (name == "dpbalance") return SchedulerKind::DPBalance;
  if (name == "dpf") return SchedulerKind::DPF;
  if (name == "dpk") return SchedulerKind::DPK;
  if (name == "fcfs") return SchedulerKind::FCFS;
  throw ConfigError("unknown scheduler: " + name);
}

std::string scheduler_name(SchedulerKind kind) {
  switch (kind) {
    case SchedulerKind::DPBalance: return "dpbalance";
    case SchedulerKind::DPF: return "dpf";
    case SchedulerKind::DPK: return "dpk";
    case SchedulerKind::FCFS: return "fcfs";
  }
  return "unknown";
}

std::vector<double> AllocationPlan::utilities() const {
  std::vector<double> out;
  for (const auto& [id, outcome] : per_analyst) {
    if (outcome.utility > 0.0) out.push_back(outcome.utility);
  }
  return out;
}

AllocationPlan dpbalance_round(const Ledger& ledger, const std::vector<PipelineDemand>& pending,
                               int round, const FairnessParams& params,
                               const SolverOptions& options) {
  AllocationPlan plan;
  plan.round = round;

  const std::vector<PipelineDemand> live = serviceable(ledger, pending);
  if (live.empty()) return plan;

  std::vector<AnalystDemand> analysts;
  std::map<BlockId, double> capacities;
  for (const auto& [analyst_id, pipelines] : group_by_analyst(live)) {
    analysts.push_back(aggregate_analyst(pipelines, round, ledger));
    for (const auto& [block, g] : analysts.back().gamma) {
      if (!capacities.count(block)) capacities[block] = ledger.remaining(block);
    }
  }

  Sub1Result sub1;
  try {
    sub1 = solve_subproblem1(analysts, params, capacities, options);
  } catch (const SolverDiverged& e) {
    throw SchedulerError("round " + std::to_string(round) +
                         ": analyst allocation failed: " + e.what());
  }

  // The capacity constraint weights demands by T*l, so with weights below
  // one the physical loads can exceed the remaining fractions. One joint
  // rescale restores physical feasibility while preserving ratios.
  std::map<AnalystId, double> scale = sub1.x;
  {
    std::map<BlockId, double> load;
    for (const AnalystDemand& analyst : analysts) {
      for (const auto& [block, g] : analyst.gamma) {
        load[block] += g * scale[analyst.analyst_id];
      }
    }
    double shrink = 1.0;
    for (const auto& [block, total] : load) {
      if (total > capacities[block]) shrink = std::min(shrink, capacities[block] / total);
    }
    if (shrink < 1.0) {
      for (auto& [id, s] : scale) s *= shrink;
    }
  }

  for (const AnalystDemand& analyst : analysts) {
    const double x = scale[analyst.analyst_id];
    AnalystOutcome outcome;
    outcome.x = x;
    outcome.weight = waiting_coeff(analyst.waiting_time, params.rho) * analyst.loss;
    for (const auto& [block, g] : analyst.gamma) outcome.granted[block] = g * x;

    const std::vector<PackPipeline> packs =
        make_pack_pipelines(analyst.pipelines, ledger, round, params.rho);

    std::map<BlockId, double> remaining;
    for (const auto& [block, g] : outcome.granted) remaining[block] = ledger.remaining(block);

    if (x <= 0.0 || pareto_return_check(packs, outcome.granted)) {
      outcome.returned = outcome.granted;
    } else {
      const std::vector<PipelineId> chi = max_pipeline_count(packs, outcome.granted);
      if (chi.empty()) {
        outcome.returned = outcome.granted;
      } else {
        const PackingResult packed =
            maximize_packed_utility(chi, packs, outcome.granted, remaining);
        outcome.consumed = packed.consumed;
        outcome.returned = packed.returned;
        for (const auto& [pipeline_id, kappa] : packed.scales) {
          plan.per_pipeline[pipeline_id] = kappa;
          plan.pipelines_allocated += 1;
          plan.pipeline_units += kappa;
        }
      }
    }
    // Analyst efficiency rides on the analyst-level scale. An analyst that
    // returned its whole grant left the round and scores zero.
    outcome.utility =
        outcome.consumed.empty() ? 0.0 : outcome.weight * analyst.mu * x;
    plan.per_analyst[analyst.analyst_id] = std::move(outcome);
  }
  return plan;
}

AllocationPlan dpf_round(const Ledger& ledger, const std::vector<PipelineDemand>& pending,
                         int round, double rho) {
  std::vector<PipelineDemand> order = serviceable(ledger, pending);
  std::vector<std::pair<double, std::size_t>> keys(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    keys[i] = {pipeline_max_share(normalize_demand(order[i], ledger)), i};
  }
  std::sort(keys.begin(), keys.end(), [&](const auto& a, const auto& b) {
    const PipelineDemand& pa = order[a.second];
    const PipelineDemand& pb = order[b.second];
    if (a.first != b.first) return a.first < b.first;
    if (pa.arrival_round != pb.arrival_round) return pa.arrival_round < pb.arrival_round;
    return pa.pipeline_id < pb.pipeline_id;
  });
  std::vector<PipelineDemand> sorted;
  for (const auto& [key, idx] : keys) sorted.push_back(order[idx]);
  return greedy_round(ledger, std::move(sorted), round, rho);
}

AllocationPlan dpk_round(const Ledger& ledger, const std::vector<PipelineDemand>& pending,
                         int round, double rho) {
  std::vector<PipelineDemand> order = serviceable(ledger, pending);
  std::vector<std::pair<double, std::size_t>> keys(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    double total = 0.0;
    for (const auto& [block, g] : normalize_demand(order[i], ledger)) total += g;
    keys[i] = {total, i};
  }
  std::sort(keys.begin(), keys.end(), [&](const auto& a, const auto& b) {
    const PipelineDemand& pa = order[a.second];
    const PipelineDemand& pb = order[b.second];
    if (a.first != b.first) return a.first < b.first;
    if (pa.arrival_round != pb.arrival_round) return pa.arrival_round < pb.arrival_round;
    return pa.pipeline_id < pb.pipeline_id;
  });
  std::vector<PipelineDemand> sorted;
  for (const auto& [key, idx] : keys) sorted.push_back(order[idx]);
  return greedy_round(ledger, std::move(sorted), round, rho);
}

AllocationPlan fcfs_round(const Ledger& ledger, const std::vector<PipelineDemand>& pending,
                          int round, double rho) {
  std::vector<PipelineDemand> order = serviceable(ledger, pending);
  std::sort(order.begin(), order.end(), [](const PipelineDemand& a, const PipelineDemand& b) {
    if (a.arrival_round != b.arrival_round) return a.arrival_round < b.arrival_round;
    return a.pipeline_id < b.pipeline_id;
  });
  return greedy_round(ledger, std::move(order), round, rho);
}

AllocationPlan run_scheduler(SchedulerKind kind, const Ledger& ledger,
                             const std::vector<PipelineDemand>& pending, int round,
                             const FairnessParams& params, const SolverOptions& options) {
  switch (kind) {
    case SchedulerKind::DPBalance: return dpbalance_round(ledger, pending, round, params, options);
    case SchedulerKind::DPF: return dpf_round(ledger, pending, round, params.rho);
    case SchedulerKind::DPK: return dpk_round(ledger, pending, round, params.rho);
    case SchedulerKind::FCFS: return fcfs_round(ledger, pending, round, params.rho);
  }
  throw ConfigError("unknown scheduler kind");
}

}  // namespace dpbalance
