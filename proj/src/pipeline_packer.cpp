#include "dpbalance/pipeline_packer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>

#include "dpbalance/metrics.hpp"

namespace dpbalance {

namespace {

constexpr double kFitTol = 1e-12;

double demand_on(const PackPipeline& p, const BlockId& block) {
  auto it = p.gamma.find(block);
  return it == p.gamma.end() ? 0.0 : it->second;
}

// Union of block keys across the grant and the pipelines' demands.
std::vector<BlockId> block_union(const std::vector<PackPipeline>& pipelines,
                                 const std::map<BlockId, double>& granted) {
  std::set<BlockId> keys;
  for (const auto& [id, v] : granted) keys.insert(id);
  for (const PackPipeline& p : pipelines) {
    for (const auto& [id, v] : p.gamma) keys.insert(id);
  }
  return {keys.begin(), keys.end()};
}

double granted_on(const std::map<BlockId, double>& granted, const BlockId& block) {
  auto it = granted.find(block);
  return it == granted.end() ? 0.0 : it->second;
}

// Bland-rule primal simplex on max c.y, A y <= b, y >= 0 with b >= 0.
// Rows and columns are tiny here, so a dense tableau is plenty.
std::vector<double> simplex_max(const std::vector<double>& c,
                                const std::vector<std::vector<double>>& A,
                                const std::vector<double>& b) {
  const std::size_t n = c.size();
  const std::size_t m = A.size();
  std::vector<std::vector<double>> T(m + 1, std::vector<double>(n + m + 1, 0.0));
  std::vector<std::size_t> basis(m);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t j = 0; j < n; ++j) T[r][j] = A[r][j];
    T[r][n + r] = 1.0;
    T[r][n + m] = b[r];
    basis[r] = n + r;
  }
  for (std::size_t j = 0; j < n; ++j) T[m][j] = -c[j];

  for (int iter = 0; iter < 10000; ++iter) {
    // Entering: first column with negative reduced cost (Bland).
    std::size_t enter = n + m;
    for (std::size_t j = 0; j < n + m; ++j) {
      if (T[m][j] < -1e-12) {
        enter = j;
        break;
      }
    }
    if (enter == n + m) break;
    // Leaving: min ratio, ties to smallest basis index (Bland).
    std::size_t leave = m;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < m; ++r) {
      if (T[r][enter] > 1e-12) {
        const double ratio = T[r][n + m] / T[r][enter];
        if (ratio < best_ratio - 1e-15 ||
            (ratio < best_ratio + 1e-15 && (leave == m || basis[r] < basis[leave]))) {
          best_ratio = ratio;
          leave = r;
        }
      }
    }
    if (leave == m) {
      throw AccountingError("packing LP is unbounded; grant vector is inconsistent");
    }
    const double piv = T[leave][enter];
    for (double& v : T[leave]) v /= piv;
    for (std::size_t r = 0; r <= m; ++r) {
      if (r == leave) continue;
      const double f = T[r][enter];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= n + m; ++j) T[r][j] -= f * T[leave][j];
    }
    basis[leave] = enter;
  }

  std::vector<double> y(n, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    if (basis[r] < n) y[basis[r]] = std::max(0.0, T[r][n + m]);
  }
  return y;
}

const PackPipeline& pipeline_by_id(const std::vector<PackPipeline>& pipelines,
                                   const PipelineId& id) {
  for (const PackPipeline& p : pipelines) {
    if (p.id == id) return p;
  }
  throw InfeasibleSelection("selection references unknown pipeline " + id);
}

bool fits_at_unit_scale(const std::vector<const PackPipeline*>& chosen,
                        const std::map<BlockId, double>& granted) {
  std::map<BlockId, double> load;
  for (const PackPipeline* p : chosen) {
    for (const auto& [block, g] : p->gamma) load[block] += g;
  }
  for (const auto& [block, total] : load) {
    if (total > granted_on(granted, block) + kFitTol) return false;
  }
  return true;
}

}  // namespace

std::vector<PackPipeline> make_pack_pipelines(const std::vector<PipelineDemand>& pipelines,
                                              const Ledger& ledger, int round, double rho) {
  std::vector<PackPipeline> out;
  out.reserve(pipelines.size());
  for (const PipelineDemand& p : pipelines) {
    PackPipeline packed;
    packed.id = p.pipeline_id;
    packed.gamma = normalize_demand(p, ledger);
    packed.mu = pipeline_max_share(packed.gamma);
    double loss = 1.0;
    if (!p.losses.empty()) {
      loss = 0.0;
      for (const auto& [id, l] : p.losses) loss += l;
      loss /= static_cast<double>(p.losses.size());
    }
    packed.weight = waiting_coeff(std::max(0, round - p.arrival_round), rho) * loss;
    out.push_back(std::move(packed));
  }
  return out;
}

bool pareto_return_check(const std::vector<PackPipeline>& pipelines,
                         const std::map<BlockId, double>& granted) {
  if (pipelines.empty()) return true;
  const PackPipeline* min_mu = &pipelines.front();
  for (const PackPipeline& p : pipelines) {
    if (p.mu < min_mu->mu) min_mu = &p;
  }
  bool ge_everywhere = true;
  bool gt_somewhere = false;
  for (const BlockId& block : block_union(pipelines, granted)) {
    const double demand = demand_on(*min_mu, block);
    const double grant = granted_on(granted, block);
    if (demand < grant - kFitTol) ge_everywhere = false;
    if (demand > grant + kFitTol) gt_somewhere = true;
  }
  return ge_everywhere && gt_somewhere;
}

std::vector<PipelineId> max_pipeline_count(const std::vector<PackPipeline>& pipelines,
                                           const std::map<BlockId, double>& granted) {
  std::vector<const PackPipeline*> order;
  for (const PackPipeline& p : pipelines) order.push_back(&p);
  std::sort(order.begin(), order.end(),
            [](const PackPipeline* a, const PackPipeline* b) { return a->id < b->id; });
  const std::size_t n = order.size();
  const std::vector<BlockId> blocks = block_union(pipelines, granted);

  // Best = (count, packed-utility value, ids); ids compared ascending.
  std::vector<PipelineId> best_ids;
  double best_value = -std::numeric_limits<double>::infinity();
  int best_count = -1;

  // Fractional-relaxation bound: on every block the cheapest remaining
  // demands must fit the residual grant.
  auto upper_bound = [&](std::size_t next, const std::map<BlockId, double>& residual) {
    int bound = static_cast<int>(n - next);
    for (const BlockId& block : blocks) {
      std::vector<double> demands;
      for (std::size_t j = next; j < n; ++j) {
        const double d = demand_on(*order[j], block);
        if (d > 0.0) demands.push_back(d);
      }
      if (demands.empty()) continue;
      std::sort(demands.begin(), demands.end());
      double room = granted_on(residual, block);
      int fit = static_cast<int>(n - next) - static_cast<int>(demands.size());
      for (double d : demands) {
        if (d <= room + kFitTol) {
          room -= d;
          ++fit;
        } else {
          break;
        }
      }
      bound = std::min(bound, fit);
    }
    return bound;
  };

  std::vector<const PackPipeline*> chosen;
  auto evaluate_leaf = [&] {
    const int count = static_cast<int>(chosen.size());
    if (count < best_count) return;
    std::vector<PipelineId> ids;
    for (const PackPipeline* p : chosen) ids.push_back(p->id);
    double value = 0.0;
    if (!ids.empty()) {
      value = maximize_packed_utility(ids, pipelines, granted).objective;
    }
    if (count > best_count || value > best_value + 1e-12 ||
        (value > best_value - 1e-12 && ids < best_ids)) {
      best_count = count;
      best_value = value;
      best_ids = ids;
    }
  };

  std::function<void(std::size_t, std::map<BlockId, double>)> dfs =
      [&](std::size_t next, std::map<BlockId, double> residual) {
        if (static_cast<int>(chosen.size()) + upper_bound(next, residual) < best_count) return;
        if (next == n) {
          evaluate_leaf();
          return;
        }
        // Include when it fits.
        const PackPipeline* p = order[next];
        bool fits = true;
        for (const auto& [block, g] : p->gamma) {
          if (g > granted_on(residual, block) + kFitTol) {
            fits = false;
            break;
          }
        }
        if (fits) {
          std::map<BlockId, double> after = residual;
          for (const auto& [block, g] : p->gamma) after[block] -= g;
          chosen.push_back(p);
          dfs(next + 1, std::move(after));
          chosen.pop_back();
        }
        dfs(next + 1, std::move(residual));
      };
  dfs(0, granted);
  return best_ids;
}

PackingResult maximize_packed_utility(const std::vector<PipelineId>& chi,
                                      const std::vector<PackPipeline>& pipelines,
                                      const std::map<BlockId, double>& granted,
                                      const std::map<BlockId, double>& block_remaining) {
  PackingResult result;
  result.selected = chi;
  std::sort(result.selected.begin(), result.selected.end());

  std::vector<const PackPipeline*> chosen;
  for (const PipelineId& id : result.selected) chosen.push_back(&pipeline_by_id(pipelines, id));
  if (!fits_at_unit_scale(chosen, granted)) {
    throw InfeasibleSelection("selection does not fit the grant at unit scale");
  }

  std::map<PipelineId, double> kappa;
  if (chosen.size() == 1) {
    // Single pipeline: scale straight to the binding block.
    const PackPipeline& p = *chosen.front();
    double scale = std::numeric_limits<double>::infinity();
    for (const auto& [block, g] : p.gamma) {
      scale = std::min(scale, granted_on(granted, block) / g);
      if (!block_remaining.empty()) {
        scale = std::min(scale, granted_on(block_remaining, block) / g);
      }
    }
    kappa[p.id] = std::max(1.0, scale);
  } else if (!chosen.empty()) {
    // LP over y = kappa - 1 >= 0 with per-block residual capacity.
    std::vector<BlockId> rows;
    {
      std::set<BlockId> keys;
      for (const PackPipeline* p : chosen) {
        for (const auto& [block, g] : p->gamma) keys.insert(block);
      }
      rows.assign(keys.begin(), keys.end());
    }
    std::vector<double> c;
    for (const PackPipeline* p : chosen) c.push_back(p->mu * p->weight);
    std::vector<std::vector<double>> A;
    std::vector<double> b;
    for (const BlockId& block : rows) {
      std::vector<double> row;
      double used = 0.0;
      for (const PackPipeline* p : chosen) {
        const double g = demand_on(*p, block);
        row.push_back(g);
        used += g;
      }
      double cap = granted_on(granted, block);
      if (!block_remaining.empty()) cap = std::min(cap, granted_on(block_remaining, block));
      A.push_back(std::move(row));
      b.push_back(std::max(0.0, cap - used));
    }
    const std::vector<double> y = simplex_max(c, A, b);
    for (std::size_t j = 0; j < chosen.size(); ++j) kappa[chosen[j]->id] = 1.0 + y[j];
  }

  for (const PackPipeline* p : chosen) {
    const double k = kappa[p->id];
    result.scales[p->id] = k;
    result.objective += p->mu * p->weight * k;
    for (const auto& [block, g] : p->gamma) result.consumed[block] += k * g;
  }
  result.returned = compute_returns(granted, result);
  return result;
}

std::map<BlockId, double> compute_returns(const std::map<BlockId, double>& granted,
                                          const PackingResult& result) {
  std::map<BlockId, double> returned;
  for (const auto& [block, grant] : granted) {
    const double used = result.consumed.count(block) ? result.consumed.at(block) : 0.0;
    const double back = grant - used;
    if (back < -1e-9) {
      throw AccountingError("consumed " + std::to_string(used) + " exceeds grant " +
                            std::to_string(grant) + " on block " + block);
    }
    returned[block] = std::max(0.0, back);
  }
  for (const auto& [block, used] : result.consumed) {
    if (!granted.count(block) && used > 1e-9) {
      throw AccountingError("consumption on ungranted block " + block);
    }
  }
  return returned;
}

}  // namespace dpbalance
