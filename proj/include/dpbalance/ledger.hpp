#pragma once

#include <map>
#include <string>
#include <vector>

#include "dpbalance/errors.hpp"

namespace dpbalance {

using BlockId = std::string;
using DeviceId = std::string;

// Absolute tolerance on budget comparisons. Exact-fit allocations must not
// be rejected by floating-point accumulation noise.
inline constexpr double kEpsTol = 1e-9;

// One time-partitioned data block with its RDP budget and consumed loss.
struct PrivacyBlock {
  DeviceId device_id;
  BlockId block_id;
  int created_round = 0;
  double budget_eps = 0.0;
  double consumed_eps = 0.0;
};

struct DeviceProfile {
  DeviceId device_id;
  double global_budget = 0.0;  // drawn once at creation, never mutated
  int blocks_per_round = 0;
};

// Sequential composition: losses on one block add up.
double compose_sequential(const std::vector<double>& losses);

// Parallel composition: the dataset-level loss is the max over blocks.
double compose_parallel(const std::vector<double>& per_block_losses);

// Adds eps to the block's consumed loss; throws BudgetExceeded if the
// bound consumed <= budget + kEpsTol would break.
PrivacyBlock charge(PrivacyBlock block, double eps);

// (budget - consumed) / budget clamped to [0, 1]; 0 for a zero-budget block.
double remaining_fraction(const PrivacyBlock& block);

// Tracks every device and block of one simulation. Pure value semantics:
// a simulation owns its ledger exclusively, copies are independent.
class Ledger {
 public:
  // RDP order carried as metadata only; compositions never use it.
  explicit Ledger(double rdp_order = 10.0) : rdp_order_(rdp_order) {}

  void add_device(DeviceProfile device);
  // Block budget must equal the owning device's global budget.
  void add_block(PrivacyBlock block);

  bool has_block(const BlockId& id) const;
  const PrivacyBlock& block(const BlockId& id) const;
  const DeviceProfile& device(const DeviceId& id) const;

  // A block is retired once its remaining fraction is within tolerance of
  // zero; retired blocks are excluded from demand matching, not errors.
  bool is_retired(const BlockId& id) const;
  double remaining(const BlockId& id) const;

  // Charges a physical fraction of the block's total budget.
  void charge_fraction(const BlockId& id, double fraction);
  void charge_eps(const BlockId& id, double eps);

  // Ids of live (non-retired) blocks, ordered by id.
  std::vector<BlockId> live_blocks() const;
  // Total blocks ever created for a device (including retired ones).
  int device_block_count(const DeviceId& device) const;
  // The device's most recent `count` live blocks, newest first by creation.
  std::vector<BlockId> latest_blocks(const DeviceId& device, int count) const;

  const std::map<BlockId, PrivacyBlock>& blocks() const { return blocks_; }
  const std::map<DeviceId, DeviceProfile>& devices() const { return devices_; }
  double rdp_order() const { return rdp_order_; }

 private:
  double rdp_order_;
  std::map<DeviceId, DeviceProfile> devices_;
  std::map<BlockId, PrivacyBlock> blocks_;
  // Per device, block ids in creation order.
  std::map<DeviceId, std::vector<BlockId>> creation_order_;
};

}  // namespace dpbalance
