#include "dpbalance/workload.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dpbalance/rng.hpp"

namespace dpbalance {

namespace {

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ConfigError(std::string(name) + " must be in [0,1]");
  }
}

void check_range(double lo, double hi, const char* name) {
  if (!(lo >= 0.0 && lo < hi)) {
    throw ConfigError(std::string(name) + " must satisfy 0 <= low < high");
  }
}

std::string pad_index(const char* prefix, int value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, value);
  return buf;
}

}  // namespace

void WorkloadConfig::validate() const {
  if (device_count <= 0) throw ConfigError("device_count must be positive");
  if (blocks_per_round < 0) throw ConfigError("blocks_per_round must be >= 0");
  if (analysts_per_arrival < 0) throw ConfigError("analysts_per_arrival must be >= 0");
  if (pipelines_per_analyst <= 0) throw ConfigError("pipelines_per_analyst must be positive");
  if (arrival_rate < 0.0) throw ConfigError("arrival_rate must be >= 0");
  if (depth_long <= 0 || depth_short <= 0) throw ConfigError("window depths must be positive");
  check_probability(mice_fraction, "mice_fraction");
  check_probability(depth_long_prob, "depth_long_prob");
  check_probability(full_device_prob, "full_device_prob");
  check_probability(partial_device_fraction, "partial_device_fraction");
  check_range(budget_low, budget_high, "device budget range");
  check_range(mice_eps_low, mice_eps_high, "mice eps range");
  check_range(elephant_eps_low, elephant_eps_high, "elephant eps range");
  if (loss_range) {
    if (!(loss_range->first > 0.0 && loss_range->first <= loss_range->second &&
          loss_range->second <= 1.0)) {
      throw ConfigError("loss_range must satisfy 0 < low <= high <= 1");
    }
  }
  if (!(rdp_order > 1.0)) throw ConfigError("rdp_order must exceed 1");
}

std::map<BlockId, double> normalize_demand(const PipelineDemand& pipeline, const Ledger& ledger) {
  std::map<BlockId, double> gamma;
  for (const auto& [block_id, eps] : pipeline.demands) {
    if (!ledger.has_block(block_id) || ledger.is_retired(block_id)) {
      throw UnknownBlock("pipeline " + pipeline.pipeline_id + " demands missing or retired block " +
                         block_id);
    }
    gamma[block_id] = eps / ledger.block(block_id).budget_eps;
  }
  return gamma;
}

double pipeline_max_share(const std::map<BlockId, double>& gamma) {
  double mu = 0.0;
  for (const auto& [id, g] : gamma) mu = std::max(mu, g);
  if (mu <= 0.0) throw EmptyDemand("demand vector has no positive entry");
  return mu;
}

double weighted_loss(const std::vector<double>& mus, const std::vector<double>& losses) {
  if (mus.size() != losses.size()) throw EmptyDemand("mu/loss length mismatch");
  double total_mu = 0.0;
  for (double mu : mus) total_mu += mu;
  if (total_mu <= 0.0) throw EmptyDemand("sum of maximum shares is zero");
  double loss = 0.0;
  for (std::size_t i = 0; i < mus.size(); ++i) loss += mus[i] / total_mu * losses[i];
  return loss;
}

AnalystDemand aggregate_analyst(const std::vector<PipelineDemand>& pipelines, int round,
                                const Ledger& ledger) {
  if (pipelines.empty()) throw EmptyDemand("no pipelines to aggregate");
  AnalystDemand analyst;
  analyst.analyst_id = pipelines.front().analyst_id;
  int earliest_arrival = pipelines.front().arrival_round;

  std::vector<double> mus;
  std::vector<double> pipeline_losses;
  for (const PipelineDemand& p : pipelines) {
    if (p.analyst_id != analyst.analyst_id) {
      throw MixedOwnership("pipelines from " + p.analyst_id + " and " + analyst.analyst_id);
    }
    earliest_arrival = std::min(earliest_arrival, p.arrival_round);
    auto gamma = normalize_demand(p, ledger);
    for (const auto& [block_id, g] : gamma) analyst.gamma[block_id] += g;
    mus.push_back(pipeline_max_share(gamma));

    // Pipeline loss: average of its per-block weights, 1.0 if none given.
    double sum = 0.0;
    for (const auto& [block_id, l] : p.losses) sum += l;
    pipeline_losses.push_back(p.losses.empty() ? 1.0 : sum / static_cast<double>(p.losses.size()));
  }

  analyst.mu = 0.0;
  for (const auto& [id, g] : analyst.gamma) analyst.mu = std::max(analyst.mu, g);
  analyst.waiting_time = std::max(0, round - earliest_arrival);
  analyst.loss = weighted_loss(mus, pipeline_losses);
  analyst.pipelines = pipelines;
  return analyst;
}

std::vector<DeviceProfile> generate_devices(const WorkloadConfig& config) {
  config.validate();
  std::vector<DeviceProfile> devices;
  devices.reserve(config.device_count);
  for (int d = 0; d < config.device_count; ++d) {
    Rng rng = Rng::stream(config.seed, "device-budget", static_cast<std::uint64_t>(d));
    DeviceProfile profile;
    profile.device_id = pad_index("d", d, 3);
    profile.global_budget = rng.uniform(config.budget_low, config.budget_high);
    profile.blocks_per_round = config.blocks_per_round;
    devices.push_back(std::move(profile));
  }
  return devices;
}

RoundArrivals generate_workload(const WorkloadConfig& config, int round, const Ledger& ledger) {
  config.validate();
  RoundArrivals out;

  // Fresh blocks; ids encode (device, creation index) so creation order is
  // recoverable from the id alone.
  std::map<DeviceId, std::vector<BlockId>> fresh_by_device;
  for (const auto& [device_id, profile] : ledger.devices()) {
    const int existing = ledger.device_block_count(device_id);
    for (int j = 0; j < profile.blocks_per_round; ++j) {
      PrivacyBlock block;
      block.device_id = device_id;
      block.block_id = device_id + ":" + pad_index("b", existing + j, 5);
      block.created_round = round;
      block.budget_eps = profile.global_budget;
      block.consumed_eps = 0.0;
      fresh_by_device[device_id].push_back(block.block_id);
      out.new_blocks.push_back(std::move(block));
    }
  }

  // Window lookup: this round's fresh blocks count as the newest.
  auto window = [&](const DeviceId& device, int depth) {
    std::vector<BlockId> ids;
    auto fresh = fresh_by_device.find(device);
    if (fresh != fresh_by_device.end()) {
      for (auto rit = fresh->second.rbegin();
           rit != fresh->second.rend() && static_cast<int>(ids.size()) < depth; ++rit) {
        ids.push_back(*rit);
      }
    }
    const int missing = depth - static_cast<int>(ids.size());
    if (missing > 0) {
      for (const BlockId& id : ledger.latest_blocks(device, missing)) ids.push_back(id);
    }
    return ids;
  };

  // Arrival batches for this round.
  Rng arrivals = Rng::stream(config.seed, "arrivals", static_cast<std::uint64_t>(round));
  const int batches = arrivals.poisson(config.arrival_rate);

  // Device ids in stable order for subset selection.
  std::vector<DeviceId> device_ids;
  for (const auto& [id, profile] : ledger.devices()) device_ids.push_back(id);

  for (int batch = 0; batch < batches; ++batch) {
    for (int a = 0; a < config.analysts_per_arrival; ++a) {
      const AnalystId analyst_id =
          pad_index("r", round, 3) + pad_index(":g", batch, 1) + pad_index(":a", a, 2);
      Rng rng = Rng::stream(config.seed, "analyst",
                            (static_cast<std::uint64_t>(round) << 32) ^
                                (static_cast<std::uint64_t>(batch) << 16) ^
                                static_cast<std::uint64_t>(a));
      out.new_analysts.push_back(analyst_id);

      // Device targeting is analyst-level: all devices or a random subset.
      std::vector<DeviceId> targets;
      if (rng.bernoulli(config.full_device_prob) || device_ids.empty()) {
        targets = device_ids;
      } else {
        std::size_t want = static_cast<std::size_t>(
            std::max(1.0, std::round(config.partial_device_fraction *
                                     static_cast<double>(device_ids.size()))));
        for (std::size_t idx : rng.sample_indices(device_ids.size(), want)) {
          targets.push_back(device_ids[idx]);
        }
        std::sort(targets.begin(), targets.end());
      }

      for (int p = 0; p < config.pipelines_per_analyst; ++p) {
        PipelineDemand pipeline;
        pipeline.analyst_id = analyst_id;
        pipeline.pipeline_id = analyst_id + pad_index(":p", p, 2);
        pipeline.arrival_round = round;

        const bool mice = rng.bernoulli(config.mice_fraction);
        const double eps = mice ? rng.uniform(config.mice_eps_low, config.mice_eps_high)
                                : rng.uniform(config.elephant_eps_low, config.elephant_eps_high);
        const int depth = rng.bernoulli(config.depth_long_prob) ? config.depth_long
                                                                : config.depth_short;
        const double loss =
            config.loss_range ? rng.uniform(config.loss_range->first, config.loss_range->second)
                              : 1.0;

        // Window anchored at admission: the latest live blocks per device.
        for (const DeviceId& device : targets) {
          for (const BlockId& block_id : window(device, depth)) {
            pipeline.demands[block_id] = eps;
            pipeline.losses[block_id] = loss;
          }
        }
        if (!pipeline.demands.empty()) out.new_pipelines.push_back(std::move(pipeline));
      }
    }
  }
  return out;
}

Fixture fig2_fixture() {
  Fixture fx;
  for (const char* name : {"B1", "B2"}) {
    DeviceProfile device;
    device.device_id = std::string("dev-") + name;
    device.global_budget = 1.0;
    device.blocks_per_round = 0;
    fx.ledger.add_device(device);

    PrivacyBlock block;
    block.device_id = device.device_id;
    block.block_id = name;
    block.created_round = 0;
    block.budget_eps = 1.0;
    fx.ledger.add_block(block);
  }

  auto make = [](const char* analyst, const char* pipeline, double b1, double b2) {
    PipelineDemand p;
    p.analyst_id = analyst;
    p.pipeline_id = pipeline;
    p.arrival_round = 0;
    p.demands = {{"B1", b1}, {"B2", b2}};
    p.losses = {{"B1", 1.0}, {"B2", 1.0}};
    return p;
  };
  fx.pipelines = {
      make("Alice", "P1", 0.5, 0.3),
      make("Alice", "P2", 0.3, 0.5),
      make("Bob", "P3", 0.4, 0.3),
      make("Bob", "P4", 0.3, 0.3),
  };
  return fx;
}

}  // namespace dpbalance
