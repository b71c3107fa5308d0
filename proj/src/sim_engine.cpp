#include "dpbalance/sim_engine.hpp"

#include <algorithm>
#include <thread>

namespace dpbalance {

SimulationState make_state(const WorkloadConfig& config) {
  config.validate();
  SimulationState state;
  state.config = config;
  state.ledger = Ledger(config.rdp_order);
  for (DeviceProfile& device : generate_devices(config)) {
    state.ledger.add_device(std::move(device));
  }
  return state;
}

RoundMetrics step_round(SimulationState& state, SchedulerKind scheduler,
                        const FairnessParams& params, const SolverOptions& options) {
  const int round = state.clock + 1;

  RoundArrivals arrivals = generate_workload(state.config, round, state.ledger);
  for (PrivacyBlock& block : arrivals.new_blocks) state.ledger.add_block(std::move(block));
  for (PipelineDemand& pipeline : arrivals.new_pipelines) {
    state.pending.push_back(std::move(pipeline));
  }

  std::set<BlockId> retired_before;
  for (const auto& [id, block] : state.ledger.blocks()) {
    if (remaining_fraction(block) <= kEpsTol) retired_before.insert(id);
  }

  AllocationPlan plan = run_scheduler(scheduler, state.ledger, state.pending, round, params,
                                      options);

  // Charge physically, per granted pipeline per block, in deterministic
  // order. The audit map accumulates the very same additions.
  for (const PipelineDemand& pipeline : state.pending) {
    auto granted = plan.per_pipeline.find(pipeline.pipeline_id);
    if (granted == plan.per_pipeline.end()) continue;
    const double kappa = granted->second;
    for (const auto& [block, eps] : pipeline.demands) {
      if (retired_before.count(block)) state.retired_grants.insert(block);
      const double amount = kappa * eps;
      state.ledger.charge_eps(block, amount);
      state.charged[block] += amount;
    }
  }

  std::erase_if(state.pending, [&](const PipelineDemand& p) {
    return plan.per_pipeline.count(p.pipeline_id) > 0;
  });

  int newly_retired = 0;
  for (const auto& [id, block] : state.ledger.blocks()) {
    if (remaining_fraction(block) <= kEpsTol && !retired_before.count(id)) {
      ++newly_retired;
    }
  }

  RoundMetrics metrics;
  metrics.round = round;
  metrics.pipelines_allocated = plan.pipelines_allocated;
  metrics.pipeline_units = plan.pipeline_units;
  metrics.blocks_retired = newly_retired;
  const std::vector<double> utilities = plan.utilities();
  metrics.round_efficiency = dominant_efficiency(utilities);
  if (utilities.empty()) {
    metrics.round_fairness = 0.0;
    metrics.active = false;
  } else {
    metrics.round_fairness = dominant_fairness(utilities, params.beta);
    metrics.active = true;
  }

  state.clock = round;
  return metrics;
}

MetricSeries run(const SimulationSpec& spec, const SolverOptions& options) {
  if (spec.rounds < 1) throw InvalidRounds("rounds must be >= 1");
  FairnessParams params(spec.beta, spec.lambda, spec.rho);
  SimulationState state = make_state(spec.workload);
  MetricSeries series;
  for (int r = 0; r < spec.rounds; ++r) {
    series.append(step_round(state, spec.scheduler, params, options));
  }
  if (!audit_conservation(state)) {
    throw AccountingError("conservation audit failed after run");
  }
  return series;
}

std::vector<std::pair<double, MetricSeries>> sweep_beta(const SimulationSpec& spec,
                                                        const std::vector<double>& betas,
                                                        int jobs) {
  std::vector<std::pair<double, MetricSeries>> results(betas.size());
  auto work = [&](std::size_t index) {
    SimulationSpec local = spec;
    local.beta = betas[index];
    local.lambda = -1.0;  // keep the beta/lambda coupling across the sweep
    results[index] = {betas[index], run(local)};
  };
  if (jobs <= 1 || betas.size() <= 1) {
    for (std::size_t i = 0; i < betas.size(); ++i) work(i);
    return results;
  }
  std::vector<std::thread> threads;
  std::size_t next = 0;
  const std::size_t width = static_cast<std::size_t>(jobs);
  while (next < betas.size()) {
    threads.clear();
    for (std::size_t t = 0; t < width && next < betas.size(); ++t, ++next) {
      threads.emplace_back(work, next);
    }
    for (std::thread& th : threads) th.join();
  }
  return results;
}

bool audit_conservation(const SimulationState& state) {
  if (!state.retired_grants.empty()) return false;
  for (const auto& [id, block] : state.ledger.blocks()) {
    auto it = state.charged.find(id);
    const double charged = it == state.charged.end() ? 0.0 : it->second;
    if (charged != block.consumed_eps) return false;
  }
  return true;
}

}  // namespace dpbalance
