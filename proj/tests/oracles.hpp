#pragma once

// Test-only oracles, independent of the library's solver paths: a feasible
// grid search for the continuous allocation, exhaustive subset enumeration
// for pipeline counts, and vertex enumeration for the packing LP.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "dpbalance/analyst_solver.hpp"
#include "dpbalance/pipeline_packer.hpp"

namespace oracle {

using dpbalance::AllocationProblem;
using dpbalance::BlockId;
using dpbalance::PackPipeline;

inline bool feasible(const AllocationProblem& p, const std::vector<double>& x) {
  for (std::size_t k = 0; k < p.blocks(); ++k) {
    double load = 0.0;
    for (std::size_t i = 0; i < p.analysts(); ++i) load += p.gamma[i][k] * p.weight[i] * x[i];
    if (load > p.capacity[k] + 1e-12) return false;
  }
  return true;
}

// Best alpha-fairness objective over a feasible grid, refined twice around
// the best point. Returns a valid lower bound on the optimum.
inline double grid_search_objective(const AllocationProblem& p, double beta, int steps) {
  const std::size_t m = p.analysts();
  std::vector<double> xmax(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double bound = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < p.blocks(); ++k) {
      const double w = p.gamma[i][k] * p.weight[i];
      if (w > 0.0) bound = std::min(bound, p.capacity[k] / w);
    }
    xmax[i] = bound;
  }

  std::vector<double> lo(m, 0.0);
  std::vector<double> hi = xmax;
  std::vector<double> best_x(m, 0.0);
  double best = -std::numeric_limits<double>::infinity();

  for (int refine = 0; refine < 3; ++refine) {
    std::vector<std::size_t> idx(m, 0);
    std::vector<double> x(m);
    for (;;) {
      for (std::size_t i = 0; i < m; ++i) {
        x[i] = lo[i] + (hi[i] - lo[i]) * static_cast<double>(idx[i]) / steps;
      }
      bool positive = true;
      for (double v : x) positive = positive && v > 0.0;
      if (positive && feasible(p, x)) {
        const double obj = dpbalance::alpha_objective_of(p, x, beta);
        if (obj > best) {
          best = obj;
          best_x = x;
        }
      }
      std::size_t d = 0;
      while (d < m) {
        if (++idx[d] <= static_cast<std::size_t>(steps)) break;
        idx[d] = 0;
        ++d;
      }
      if (d == m) break;
    }
    // Zoom into the best cell.
    for (std::size_t i = 0; i < m; ++i) {
      const double width = (hi[i] - lo[i]) / steps;
      lo[i] = std::max(0.0, best_x[i] - width);
      hi[i] = std::min(xmax[i], best_x[i] + width);
    }
  }
  return best;
}

// Exhaustive maximum pipeline count at unit scale.
inline int brute_force_max_count(const std::vector<PackPipeline>& pipelines,
                                 const std::map<BlockId, double>& granted) {
  const std::size_t n = pipelines.size();
  int best = 0;
  for (std::size_t mask = 0; mask < (1ULL << n); ++mask) {
    std::map<BlockId, double> load;
    int count = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask & (1ULL << j)) {
        ++count;
        for (const auto& [block, g] : pipelines[j].gamma) load[block] += g;
      }
    }
    bool ok = true;
    for (const auto& [block, total] : load) {
      auto it = granted.find(block);
      const double cap = it == granted.end() ? 0.0 : it->second;
      if (total > cap + 1e-12) {
        ok = false;
        break;
      }
    }
    if (ok) best = std::max(best, count);
  }
  return best;
}

// Exact LP optimum of max sum c_j k_j s.t. Gamma k <= cap, k >= 1 via
// enumeration of all basic feasible points (n <= 3).
inline double vertex_enum_lp(const std::vector<std::vector<double>>& constraints,
                             const std::vector<double>& bounds, const std::vector<double>& c) {
  const std::size_t n = c.size();
  // Constraint set: rows (<= bounds) plus lower bounds k_j >= 1.
  std::vector<std::vector<double>> A = constraints;
  std::vector<double> b = bounds;
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> row(n, 0.0);
    row[j] = -1.0;
    A.push_back(row);
    b.push_back(-1.0);
  }
  const std::size_t total = A.size();
  double best = -std::numeric_limits<double>::infinity();

  // Enumerate all n-subsets of constraints.
  std::vector<bool> select(total, false);
  std::fill(select.begin(), select.begin() + n, true);
  std::vector<std::size_t> subset;
  do {
    subset.clear();
    for (std::size_t r = 0; r < total; ++r) {
      if (select[r]) subset.push_back(r);
    }
    // Solve the n x n system.
    std::vector<std::vector<double>> M(n, std::vector<double>(n + 1, 0.0));
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t ccol = 0; ccol < n; ++ccol) M[r][ccol] = A[subset[r]][ccol];
      M[r][n] = b[subset[r]];
    }
    bool singular = false;
    for (std::size_t col = 0; col < n && !singular; ++col) {
      std::size_t piv = col;
      for (std::size_t r = col + 1; r < n; ++r) {
        if (std::abs(M[r][col]) > std::abs(M[piv][col])) piv = r;
      }
      if (std::abs(M[piv][col]) < 1e-12) {
        singular = true;
        break;
      }
      std::swap(M[col], M[piv]);
      for (std::size_t r = 0; r < n; ++r) {
        if (r == col) continue;
        const double f = M[r][col] / M[col][col];
        for (std::size_t cc = col; cc <= n; ++cc) M[r][cc] -= f * M[col][cc];
      }
    }
    if (singular) continue;
    std::vector<double> k(n);
    for (std::size_t r = 0; r < n; ++r) k[r] = M[r][n] / M[r][r];
    bool ok = true;
    for (std::size_t r = 0; r < total && ok; ++r) {
      double lhs = 0.0;
      for (std::size_t j = 0; j < n; ++j) lhs += A[r][j] * k[j];
      ok = lhs <= b[r] + 1e-9;
    }
    if (!ok) continue;
    double value = 0.0;
    for (std::size_t j = 0; j < n; ++j) value += c[j] * k[j];
    best = std::max(best, value);
  } while (std::prev_permutation(select.begin(), select.end()));
  return best;
}

}  // namespace oracle
