#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dpbalance/ledger.hpp"

namespace dpbalance {

using AnalystId = std::string;
using PipelineId = std::string;

// One pipeline's per-block privacy demands plus matching-degree weights.
struct PipelineDemand {
  AnalystId analyst_id;
  PipelineId pipeline_id;
  int arrival_round = 0;
  std::map<BlockId, double> demands;  // block -> demanded eps, all > 0
  std::map<BlockId, double> losses;   // block -> weight in (0,1], same keys
};

// Per-analyst demand aggregated over its pipelines at x_ij = 1.
struct AnalystDemand {
  AnalystId analyst_id;
  std::map<BlockId, double> gamma;  // per-block normalized demand, summed
  double mu = 0.0;                  // max entry of gamma
  int waiting_time = 0;             // rounds since earliest pipeline arrival
  double loss = 1.0;                // mu-weighted average pipeline loss
  std::vector<PipelineDemand> pipelines;
};

struct WorkloadConfig {
  int device_count = 10;
  double budget_low = 1.0;
  double budget_high = 1.5;
  int blocks_per_round = 2;
  double arrival_rate = 1.0;  // Poisson rate of arrival batches per round
  int analysts_per_arrival = 3;
  int pipelines_per_analyst = 5;
  double mice_fraction = 0.75;
  double mice_eps_low = 0.005;
  double mice_eps_high = 0.015;
  double elephant_eps_low = 0.095;
  double elephant_eps_high = 0.105;
  int depth_long = 10;
  int depth_short = 1;
  double depth_long_prob = 0.25;
  double full_device_prob = 0.5;
  double partial_device_fraction = 0.2;
  // Matching-degree weights are 1.0 unless a draw interval is configured.
  std::optional<std::pair<double, double>> loss_range;
  double rdp_order = 10.0;  // ledger metadata; never used arithmetically
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
};

// Normalized demand vector of one pipeline: demanded eps over the block's
// total budget, zero for undemanded blocks. Demanded blocks must exist and
// not be retired.
std::map<BlockId, double> normalize_demand(const PipelineDemand& pipeline, const Ledger& ledger);

// Max entry of a pipeline's normalized demand vector.
double pipeline_max_share(const std::map<BlockId, double>& gamma);

// Sums pipeline demand vectors into the analyst-level demand, with the
// weighted-average loss and the waiting time relative to `round`.
AnalystDemand aggregate_analyst(const std::vector<PipelineDemand>& pipelines, int round,
                                const Ledger& ledger);

// Sum_j (mu_j / sum mu) * l_j.
double weighted_loss(const std::vector<double>& mus, const std::vector<double>& losses);

struct RoundArrivals {
  std::vector<PrivacyBlock> new_blocks;
  std::vector<AnalystId> new_analysts;
  std::vector<PipelineDemand> new_pipelines;
};

// Devices for round 0, budgets drawn once from U(budget_low, budget_high).
std::vector<DeviceProfile> generate_devices(const WorkloadConfig& config);

// Everything that appears in one round: fresh blocks for every device and
// the Poisson arrival batches of analysts with their pipelines. Pure
// function of (config, round, seed); the ledger is only consulted for the
// latest live blocks of each device.
RoundArrivals generate_workload(const WorkloadConfig& config, int round, const Ledger& ledger);

// The two-analyst, two-block worked fixture: Alice {P1, P2}, Bob {P3, P4}.
struct Fixture {
  Ledger ledger;
  std::vector<PipelineDemand> pipelines;
};
Fixture fig2_fixture();

}  // namespace dpbalance
