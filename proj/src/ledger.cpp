#include "dpbalance/ledger.hpp"

#include <algorithm>

namespace dpbalance {

namespace {

void require_nonnegative(double eps) {
  if (!(eps >= 0.0)) {
    throw InvalidEpsilon("privacy loss must be nonnegative, got " + std::to_string(eps));
  }
}

}  // namespace

double compose_sequential(const std::vector<double>& losses) {
  double total = 0.0;
  for (double eps : losses) {
    require_nonnegative(eps);
    total += eps;
  }
  return total;
}

double compose_parallel(const std::vector<double>& per_block_losses) {
  double worst = 0.0;
  for (double eps : per_block_losses) {
    require_nonnegative(eps);
    worst = std::max(worst, eps);
  }
  return worst;
}

PrivacyBlock charge(PrivacyBlock block, double eps) {
  require_nonnegative(eps);
  const double next = block.consumed_eps + eps;
  if (next > block.budget_eps + kEpsTol) {
    throw BudgetExceeded("charge of " + std::to_string(eps) + " on block " + block.block_id +
                         " exceeds budget " + std::to_string(block.budget_eps) +
                         " (consumed " + std::to_string(block.consumed_eps) + ")");
  }
  block.consumed_eps = next;
  return block;
}

double remaining_fraction(const PrivacyBlock& block) {
  if (block.budget_eps <= 0.0) return 0.0;
  const double frac = (block.budget_eps - block.consumed_eps) / block.budget_eps;
  return std::clamp(frac, 0.0, 1.0);
}

void Ledger::add_device(DeviceProfile device) {
  devices_[device.device_id] = std::move(device);
}

void Ledger::add_block(PrivacyBlock block) {
  creation_order_[block.device_id].push_back(block.block_id);
  blocks_[block.block_id] = std::move(block);
}

bool Ledger::has_block(const BlockId& id) const {
  return blocks_.count(id) > 0;
}

const PrivacyBlock& Ledger::block(const BlockId& id) const {
  auto it = blocks_.find(id);
  if (it == blocks_.end()) throw UnknownBlock("no such block: " + id);
  return it->second;
}

const DeviceProfile& Ledger::device(const DeviceId& id) const {
  auto it = devices_.find(id);
  if (it == devices_.end()) throw UnknownBlock("no such device: " + id);
  return it->second;
}

bool Ledger::is_retired(const BlockId& id) const {
  return remaining_fraction(block(id)) <= kEpsTol;
}

double Ledger::remaining(const BlockId& id) const {
  return remaining_fraction(block(id));
}

void Ledger::charge_fraction(const BlockId& id, double fraction) {
  const PrivacyBlock& b = block(id);
  charge_eps(id, fraction * b.budget_eps);
}

void Ledger::charge_eps(const BlockId& id, double eps) {
  auto it = blocks_.find(id);
  if (it == blocks_.end()) throw UnknownBlock("no such block: " + id);
  it->second = charge(it->second, eps);
}

std::vector<BlockId> Ledger::live_blocks() const {
  std::vector<BlockId> out;
  for (const auto& [id, b] : blocks_) {
    if (remaining_fraction(b) > kEpsTol) out.push_back(id);
  }
  return out;
}

int Ledger::device_block_count(const DeviceId& device) const {
  auto it = creation_order_.find(device);
  return it == creation_order_.end() ? 0 : static_cast<int>(it->second.size());
}

std::vector<BlockId> Ledger::latest_blocks(const DeviceId& device, int count) const {
  std::vector<BlockId> out;
  auto it = creation_order_.find(device);
  if (it == creation_order_.end()) return out;
  const auto& order = it->second;
  for (auto rit = order.rbegin(); rit != order.rend() && static_cast<int>(out.size()) < count;
       ++rit) {
    if (!is_retired(*rit)) out.push_back(*rit);
  }
  return out;
}

}  // namespace dpbalance
