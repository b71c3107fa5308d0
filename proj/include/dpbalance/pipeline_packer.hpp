#pragma once

#include <map>
#include <vector>

#include "dpbalance/ledger.hpp"
#include "dpbalance/workload.hpp"

namespace dpbalance {

// One pipeline as the packer sees it: normalized demand, its maximum
// share, and the utility weight T(t_ij) * l_ij.
struct PackPipeline {
  PipelineId id;
  std::map<BlockId, double> gamma;
  double mu = 0.0;
  double weight = 1.0;
};

// Outcome of packing one analyst's grant into pipelines.
struct PackingResult {
  std::vector<PipelineId> selected;     // ascending id
  std::map<PipelineId, double> scales;  // kappa: absent/0 when unselected, else >= 1
  std::map<BlockId, double> consumed;   // per-block physical fractions
  std::map<BlockId, double> returned;   // granted - consumed
  double objective = 0.0;               // sum of mu * kappa * weight over selected
};

// True when the minimum-mu pipeline's demand vector Pareto-dominates the
// granted share (>= everywhere, > somewhere): no pipeline can reach scale
// one, so the whole grant goes back.
bool pareto_return_check(const std::vector<PackPipeline>& pipelines,
                         const std::map<BlockId, double>& granted);

// Largest-cardinality subset that fits the grant with every scale fixed
// at one. Exact depth-first search with a fractional-relaxation bound;
// ties broken by the packed-utility value, then by ascending pipeline id.
std::vector<PipelineId> max_pipeline_count(const std::vector<PackPipeline>& pipelines,
                                           const std::map<BlockId, double>& granted);

// Maximizes sum mu * kappa * weight over the selected set subject to the
// per-block grant and kappa >= 1, as an exact linear program. block_remaining,
// when non-empty, additionally caps every pipeline's physical charge at the
// block's remaining budget fraction.
PackingResult maximize_packed_utility(const std::vector<PipelineId>& chi,
                                      const std::vector<PackPipeline>& pipelines,
                                      const std::map<BlockId, double>& granted,
                                      const std::map<BlockId, double>& block_remaining = {});

// granted - consumed, elementwise; throws AccountingError on a negative
// residual beyond tolerance.
std::map<BlockId, double> compute_returns(const std::map<BlockId, double>& granted,
                                          const PackingResult& result);

// Builds PackPipelines from raw demands via the ledger, with the pipeline
// weight T(round - arrival) * mean block loss.
std::vector<PackPipeline> make_pack_pipelines(const std::vector<PipelineDemand>& pipelines,
                                              const Ledger& ledger, int round, double rho);

}  // namespace dpbalance
