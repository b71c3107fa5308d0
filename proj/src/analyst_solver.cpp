#include "dpbalance/analyst_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace dpbalance {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Working {
  std::size_t m = 0;
  std::size_t blocks = 0;
  std::vector<std::vector<double>> w;  // blocks x m: gamma_ik * weight_i
  std::vector<double> wnorm2;          // squared row norms
  std::vector<double> cap;
};

void validate_problem(const AllocationProblem& p) {
  const std::size_t m = p.analysts();
  const std::size_t K = p.blocks();
  if (m == 0) throw EmptyDemand("no analysts to allocate");
  if (K == 0) throw EmptyDemand("no blocks to allocate");
  if (p.weight.size() != m || p.gamma.size() != m) throw ConfigError("problem shape mismatch");
  for (std::size_t i = 0; i < m; ++i) {
    if (!(p.mu[i] > 0.0)) throw EmptyDemand("analyst with non-positive maximum share");
    if (!(p.weight[i] > 0.0)) throw ConfigError("non-positive analyst weight");
    if (p.gamma[i].size() != K) throw ConfigError("problem shape mismatch");
    bool any = false;
    for (double g : p.gamma[i]) {
      if (g < 0.0) throw ConfigError("negative demand entry");
      any = any || g > 0.0;
    }
    if (!any) throw EmptyDemand("analyst with all-zero demand row");
  }
  for (double c : p.capacity) {
    if (!(c > 0.0 && c <= 1.0 + kEpsTol)) throw ConfigError("capacity outside (0, 1]");
  }
}

Working build_working(const AllocationProblem& p) {
  Working W;
  W.m = p.analysts();
  W.blocks = p.blocks();
  W.cap = p.capacity;
  W.w.assign(W.blocks, std::vector<double>(W.m, 0.0));
  W.wnorm2.assign(W.blocks, 0.0);
  for (std::size_t k = 0; k < W.blocks; ++k) {
    for (std::size_t i = 0; i < W.m; ++i) {
      const double v = p.gamma[i][k] * p.weight[i];
      W.w[k][i] = v;
      W.wnorm2[k] += v * v;
    }
  }
  return W;
}

double load_of(const Working& W, std::size_t k, const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < W.m; ++i) s += W.w[k][i] * x[i];
  return s;
}

// Euclidean projection onto {x >= 0, w_k . x <= c_k} via Dykstra's cyclic
// scheme, then an exact feasibility clip. The clip keeps every caller on
// the safe side of the capacity constraints even when Dykstra stops early.
//
// Only constraints that actually get violated join the cycle: points stay
// clear of most halfspaces for the whole projection, and skipping them
// turns the per-cycle cost from O(K m) into O(|active| m).
std::vector<double> project_feasible(const Working& W, std::vector<double> z) {
  const std::size_t m = W.m;
  std::vector<double> x = std::move(z);
  std::vector<double> y(m);

  std::vector<std::size_t> cycle_set;
  std::vector<char> in_cycle(W.blocks, 0);
  auto screen = [&] {
    bool grew = false;
    for (std::size_t k = 0; k < W.blocks; ++k) {
      if (in_cycle[k] || W.wnorm2[k] <= 0.0) continue;
      if (load_of(W, k, x) > W.cap[k]) {
        in_cycle[k] = 1;
        cycle_set.push_back(k);
        grew = true;
      }
    }
    return grew;
  };
  screen();

  std::map<std::size_t, std::vector<double>> corr;  // per cycled constraint
  std::vector<double> corr0(m, 0.0);                // orthant correction
  for (int round = 0; round < 4; ++round) {
    for (int cycle = 0; cycle < 120; ++cycle) {
      double delta = 0.0;
      double scale = 0.0;
      // Nonnegative orthant.
      for (std::size_t i = 0; i < m; ++i) {
        y[i] = x[i] + corr0[i];
        const double xn = std::max(y[i], 0.0);
        corr0[i] = y[i] - xn;
        delta = std::max(delta, std::abs(xn - x[i]));
        x[i] = xn;
        scale = std::max(scale, std::abs(xn));
      }
      // Violated capacity halfspaces.
      for (std::size_t k : cycle_set) {
        auto [it, inserted] = corr.try_emplace(k, std::vector<double>(m, 0.0));
        std::vector<double>& ck = it->second;
        double dot = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          y[i] = x[i] + ck[i];
          dot += W.w[k][i] * y[i];
        }
        const double over = dot - W.cap[k];
        const double step = over > 0.0 ? over / W.wnorm2[k] : 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double xn = y[i] - step * W.w[k][i];
          ck[i] = y[i] - xn;
          delta = std::max(delta, std::abs(xn - x[i]));
          x[i] = xn;
        }
      }
      if (delta <= 1e-14 * (1.0 + scale)) break;
    }
    if (!screen()) break;  // no constraint outside the cycle set got hit
  }

  for (std::size_t i = 0; i < m; ++i) x[i] = std::max(x[i], 0.0);
  double shrink = 1.0;
  for (std::size_t k = 0; k < W.blocks; ++k) {
    const double load = load_of(W, k, x);
    if (load > W.cap[k]) shrink = std::min(shrink, W.cap[k] / load);
  }
  if (shrink < 1.0) {
    for (double& v : x) v *= shrink;
  }
  return x;
}

double phi_impl(const AllocationProblem& p, const FairnessParams& fp,
                const std::vector<double>& x) {
  const double beta = fp.beta;
  const double c2 = fp.lambda - std::abs(1.0 - beta) / beta;
  const std::size_t m = p.analysts();
  double sumv = 0.0;
  std::vector<double> terms(m, kNegInf);
  for (std::size_t i = 0; i < m; ++i) {
    const double v = p.mu[i] * p.weight[i] * x[i];
    if (v <= 0.0) {
      if (beta > 1.0) return kNegInf;
      continue;
    }
    sumv += v;
    terms[i] = (1.0 - beta) * std::log(v);
  }
  if (sumv <= 0.0) return kNegInf;
  double hi = kNegInf;
  for (double t : terms) hi = std::max(hi, t);
  double acc = 0.0;
  for (double t : terms) {
    if (t != kNegInf) acc += std::exp(t - hi);
  }
  const double lse = hi + std::log(acc);
  const double sgn = beta < 1.0 ? 1.0 : -1.0;
  return sgn / beta * lse + c2 * std::log(sumv);
}

std::vector<double> phi_gradient(const AllocationProblem& p, const FairnessParams& fp,
                                 const std::vector<double>& x) {
  const double beta = fp.beta;
  const double c2 = fp.lambda - std::abs(1.0 - beta) / beta;
  const std::size_t m = p.analysts();
  std::vector<double> logv(m, kNegInf);
  double sumv = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    // Keep the gradient defined on the boundary: a coordinate at zero has
    // unbounded marginal utility, so evaluate it at a tiny interior proxy.
    const double xi = std::max(x[i], 1e-12);
    const double v = p.mu[i] * p.weight[i] * xi;
    logv[i] = std::log(v);
    sumv += v;
  }
  double hi = kNegInf;
  for (double lv : logv) hi = std::max(hi, (1.0 - beta) * lv);
  double acc = 0.0;
  for (double lv : logv) acc += std::exp((1.0 - beta) * lv - hi);
  const double lse = hi + std::log(acc);

  std::vector<double> grad(m, 0.0);
  const double share_coeff = std::abs(1.0 - beta) / beta;
  for (std::size_t i = 0; i < m; ++i) {
    const double xi = std::max(x[i], 1e-12);
    const double softmax = std::exp((1.0 - beta) * logv[i] - lse);
    grad[i] = share_coeff * softmax / xi + c2 * p.mu[i] * p.weight[i] / sumv;
  }
  return grad;
}

// Marginal utility of the alpha-fairness objective at a single coordinate.
double grad13(const AllocationProblem& p, double beta, std::size_t i, double xi) {
  return std::exp((1.0 - beta) * std::log(p.mu[i] * p.weight[i]) - beta * std::log(xi));
}

// Nonnegative least squares for lambda >= 0 minimizing ||W^T lambda - g||.
// Plain active-set scheme over the given candidate columns.
std::vector<double> nnls_multipliers(const Working& W, const std::vector<double>& g,
                                     const std::vector<std::size_t>& candidates) {
  std::vector<double> lam(W.blocks, 0.0);
  if (candidates.empty()) return lam;
  std::vector<std::size_t> passive;
  std::vector<char> in_passive(W.blocks, 0);

  auto solve_passive = [&](std::vector<double>& out) {
    // Normal equations on the passive set, Gaussian elimination.
    const std::size_t n = passive.size();
    std::vector<std::vector<double>> A(n, std::vector<double>(n + 1, 0.0));
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        double dot = 0.0;
        for (std::size_t i = 0; i < W.m; ++i) dot += W.w[passive[r]][i] * W.w[passive[c]][i];
        A[r][c] = dot;
      }
      double rhs = 0.0;
      for (std::size_t i = 0; i < W.m; ++i) rhs += W.w[passive[r]][i] * g[i];
      A[r][n] = rhs;
    }
    for (std::size_t col = 0; col < n; ++col) {
      std::size_t piv = col;
      for (std::size_t r = col + 1; r < n; ++r) {
        if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
      }
      if (std::abs(A[piv][col]) < 1e-300) return false;
      std::swap(A[col], A[piv]);
      for (std::size_t r = 0; r < n; ++r) {
        if (r == col) continue;
        const double f = A[r][col] / A[col][col];
        for (std::size_t c = col; c <= n; ++c) A[r][c] -= f * A[col][c];
      }
    }
    out.assign(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) out[r] = A[r][n] / A[r][r];
    return true;
  };

  for (int round = 0; round < 4 * static_cast<int>(candidates.size()) + 4; ++round) {
    // Residual r = g - W^T lam; pick the candidate with the largest
    // positive correlation to enter.
    std::vector<double> resid = g;
    for (std::size_t k : passive) {
      for (std::size_t i = 0; i < W.m; ++i) resid[i] -= lam[k] * W.w[k][i];
    }
    double best = 1e-12;
    std::size_t enter = W.blocks;
    for (std::size_t k : candidates) {
      if (in_passive[k]) continue;
      double corr = 0.0;
      for (std::size_t i = 0; i < W.m; ++i) corr += W.w[k][i] * resid[i];
      if (corr > best) {
        best = corr;
        enter = k;
      }
    }
    if (enter == W.blocks) break;
    passive.push_back(enter);
    in_passive[enter] = 1;

    // Inner loop: drop negative coordinates until the passive solve is
    // feasible.
    for (;;) {
      std::vector<double> sol;
      if (!solve_passive(sol)) {
        // Degenerate normal matrix: drop the entering column and stop.
        in_passive[passive.back()] = 0;
        passive.pop_back();
        break;
      }
      bool all_pos = true;
      for (double v : sol) all_pos = all_pos && v > 0.0;
      if (all_pos) {
        for (std::size_t r = 0; r < passive.size(); ++r) lam[passive[r]] = sol[r];
        break;
      }
      // Move toward sol until the first coordinate hits zero, drop it.
      double alpha = 1.0;
      std::size_t drop = passive.size();
      for (std::size_t r = 0; r < passive.size(); ++r) {
        if (sol[r] <= 0.0) {
          const double cur = lam[passive[r]];
          const double a = cur / (cur - sol[r]);
          if (a < alpha) {
            alpha = a;
            drop = r;
          }
        }
      }
      for (std::size_t r = 0; r < passive.size(); ++r) {
        lam[passive[r]] += alpha * (sol[r] - lam[passive[r]]);
      }
      if (drop < passive.size()) {
        lam[passive[drop]] = 0.0;
        in_passive[passive[drop]] = 0;
        passive.erase(passive.begin() + static_cast<std::ptrdiff_t>(drop));
      } else {
        break;
      }
    }
  }
  return lam;
}

// Scaled KKT residual used for convergence decisions; relative in both the
// stationarity and the complementary-slackness terms.
double scaled_residual(const AllocationProblem& p, const Working& W, const FairnessParams& fp,
                       const std::vector<double>& x, const std::vector<double>& lam) {
  std::vector<double> g(p.analysts());
  const bool afair = fp.alpha_fair();
  std::vector<double> phig;
  if (!afair) phig = phi_gradient(p, fp, x);
  double gap = 0.0;
  for (std::size_t i = 0; i < p.analysts(); ++i) {
    const double gi = afair ? grad13(p, fp.beta, i, std::max(x[i], 1e-300)) : phig[i];
    g[i] = gi;
    double dual = 0.0;
    for (std::size_t k = 0; k < W.blocks; ++k) dual += lam[k] * W.w[k][i];
    gap = std::max(gap, std::abs(gi - dual) / std::max(1.0, std::abs(gi)));
  }
  double cs = 0.0;
  double infeas = 0.0;
  for (std::size_t k = 0; k < W.blocks; ++k) {
    const double slack = W.cap[k] - load_of(W, k, x);
    cs = std::max(cs, std::abs(lam[k] * slack) / std::max(1.0, lam[k]));
    infeas = std::max(infeas, -slack / W.cap[k]);
  }
  return gap + cs + std::max(0.0, infeas);
}

// Exact finisher for the alpha-fairness regime: projected Newton descent
// on the dual of the capacity-constrained problem. The primal is a closed
// form of the multipliers, redundant per-analyst box bounds
// (x_i <= min_k cap_k / w_ik) keep the dual finite for every multiplier
// vector, and a small ridge makes the Newton system solvable even with
// duplicated or dependent constraint rows, which desk-scale instances
// produce routinely (same-round blocks of one device demanded alike).
class DualNewton {
 public:
  DualNewton(const AllocationProblem& p, const Working& W, double beta)
      : p_(p), W_(W), beta_(beta), m_(p.analysts()) {
    // The box only keeps the dual finite near zero multipliers; doubling
    // the single-analyst capacity bound keeps it slack at the optimum, so
    // a capped coordinate always overloads its block and pushes the
    // multiplier up until the cap releases.
    xmax_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      double bound = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < W_.blocks; ++k) {
        if (W_.w[k][i] > 0.0) bound = std::min(bound, W_.cap[k] / W_.w[k][i]);
      }
      xmax_[i] = 2.0 * bound;
    }
  }

  // Minimizes the dual to the requested projected-gradient accuracy,
  // starting from the supplied multiplier seed (typically matched to the
  // primal iterate). Returns the primal point and multipliers on success.
  bool solve(std::vector<double> seed, std::vector<double>& x_out, std::vector<double>& lam_out) {
    std::vector<double> lam = std::move(seed);
    lam.resize(W_.blocks, 0.0);
    double seed_mass = 0.0;
    for (double v : lam) seed_mass += v;
    if (!(seed_mass > 0.0)) {
      for (std::size_t k = 0; k < W_.blocks; ++k) lam[k] = W_.wnorm2[k] > 0.0 ? 1.0 : 0.0;
    }
    std::vector<double> x(m_);
    primal_of(lam, x);
    // x scales like lam^(-1/beta) while nothing is capped, so one global
    // rescale lands the worst load near its capacity.
    double worst = 0.0;
    for (std::size_t k = 0; k < W_.blocks; ++k) {
      if (W_.wnorm2[k] > 0.0) worst = std::max(worst, load_of(W_, k, x) / W_.cap[k]);
    }
    if (worst > 1.0 && std::isfinite(worst)) {
      const double factor = std::exp(beta_ * std::log(worst));
      if (std::isfinite(factor) && factor > 0.0) {
        for (double& v : lam) v *= factor;
      }
    }
    primal_of(lam, x);
    double q = dual_value(lam, x);
    if (!std::isfinite(q)) return false;

    // Scale-free warm phase: per-block multiplicative updates traverse
    // badly scaled multiplier ranges in a few sweeps, where additive
    // steps would creep.
    {
      std::vector<double> lam_mult(W_.blocks);
      std::vector<double> x_mult(m_);
      double damp = 1.0;
      for (int sweep = 0; sweep < 120; ++sweep) {
        bool better = false;
        for (int attempt = 0; attempt < 6 && !better; ++attempt) {
          for (std::size_t k = 0; k < W_.blocks; ++k) {
            lam_mult[k] = lam[k];
            if (lam[k] <= 0.0 || W_.wnorm2[k] <= 0.0) continue;
            const double ratio = load_of(W_, k, x) / W_.cap[k];
            if (ratio > 0.0) {
              const double factor =
                  std::clamp(std::exp(beta_ * damp * std::log(ratio)), 0.125, 8.0);
              lam_mult[k] = lam[k] * factor;
            }
          }
          primal_of(lam_mult, x_mult);
          const double q_mult = dual_value(lam_mult, x_mult);
          if (std::isfinite(q_mult) && q_mult < q) {
            lam.swap(lam_mult);
            x.swap(x_mult);
            q = q_mult;
            better = true;
          } else {
            damp *= 0.5;
          }
        }
        if (!better) break;
      }
    }

    std::vector<double> grad(W_.blocks);
    std::vector<double> lam_try(W_.blocks);
    std::vector<double> x_try(m_);
    double pg_step = 1.0;
    for (int iter = 0; iter < 600; ++iter) {
      for (std::size_t k = 0; k < W_.blocks; ++k) grad[k] = W_.cap[k] - load_of(W_, k, x);
      // Projected-gradient optimality measure.
      double pgrad = 0.0;
      std::vector<std::size_t> free;
      for (std::size_t k = 0; k < W_.blocks; ++k) {
        if (W_.wnorm2[k] <= 0.0) continue;
        if (lam[k] > 0.0 || grad[k] < 0.0) {
          pgrad = std::max(pgrad, std::abs(grad[k]) / std::max(1.0, W_.cap[k]));
          free.push_back(k);
        }
      }
      if (pgrad <= 1e-12) break;

      bool accepted = false;
      if (free.size() <= 2 * m_ + 8) {
        accepted = newton_step(lam, x, q, pgrad, grad, free, lam_try, x_try);
      }
      if (!accepted) {
        // Plain projected-gradient fallback with an adaptive step.
        for (int half = 0; half < 60 && !accepted; ++half) {
          for (std::size_t k = 0; k < W_.blocks; ++k) {
            lam_try[k] = std::max(0.0, lam[k] - pg_step * grad[k]);
          }
          primal_of(lam_try, x_try);
          const double q_try = dual_value(lam_try, x_try);
          if (q_try < q) {
            lam.swap(lam_try);
            x.swap(x_try);
            q = q_try;
            pg_step *= 1.4;
            accepted = true;
          } else {
            pg_step *= 0.35;
          }
        }
        if (!accepted) break;
      }
    }

    // Exact feasibility clip; the scaling is a few ulps at convergence.
    double shrink = 1.0;
    for (std::size_t k = 0; k < W_.blocks; ++k) {
      const double load = load_of(W_, k, x);
      if (load > W_.cap[k]) shrink = std::min(shrink, W_.cap[k] / load);
    }
    if (shrink < 1.0) {
      for (double& v : x) v *= shrink;
    }
    for (double v : x) {
      if (!(v > 0.0) || !std::isfinite(v)) return false;
    }
    x_out = std::move(x);
    lam_out = std::move(lam);
    return true;
  }

 private:
  void primal_of(const std::vector<double>& lam, std::vector<double>& out) const {
    for (std::size_t i = 0; i < m_; ++i) {
      double di = 0.0;
      for (std::size_t k = 0; k < W_.blocks; ++k) di += lam[k] * W_.w[k][i];
      double xi = xmax_[i];
      if (di > 0.0) {
        const double closed =
            std::exp(((1.0 - beta_) * std::log(p_.mu[i] * p_.weight[i]) - std::log(di)) / beta_);
        xi = std::min(closed, xmax_[i]);
      }
      out[i] = xi;
    }
  }

  double dual_value(const std::vector<double>& lam, const std::vector<double>& x) const {
    double q = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      const double v = p_.mu[i] * p_.weight[i] * x[i];
      double di = 0.0;
      for (std::size_t k = 0; k < W_.blocks; ++k) di += lam[k] * W_.w[k][i];
      q += std::exp((1.0 - beta_) * std::log(v)) / (1.0 - beta_) - x[i] * di;
    }
    for (std::size_t k = 0; k < W_.blocks; ++k) q += lam[k] * W_.cap[k];
    return q;
  }

  double pgrad_of(const std::vector<double>& lam, const std::vector<double>& x) const {
    double pgrad = 0.0;
    for (std::size_t k = 0; k < W_.blocks; ++k) {
      if (W_.wnorm2[k] <= 0.0) continue;
      const double g = W_.cap[k] - load_of(W_, k, x);
      if (lam[k] > 0.0 || g < 0.0) pgrad = std::max(pgrad, std::abs(g) / std::max(1.0, W_.cap[k]));
    }
    return pgrad;
  }

  // One ridge-regularized Newton step on the free multipliers with a
  // backtracking line search. Near the optimum the dual value plateaus in
  // floating point, so a step also counts when it contracts the projected
  // gradient.
  bool newton_step(std::vector<double>& lam, std::vector<double>& x, double& q, double pgrad,
                   const std::vector<double>& grad, const std::vector<std::size_t>& free,
                   std::vector<double>& lam_try, std::vector<double>& x_try) const {
    const std::size_t n = free.size();
    if (n == 0) return false;
    // d_i and cap mask for the Hessian.
    std::vector<double> d(m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t k = 0; k < W_.blocks; ++k) d[i] += lam[k] * W_.w[k][i];
    }
    std::vector<std::vector<double>> H(n, std::vector<double>(n + 1, 0.0));
    double diag_hi = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = r; c < n; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < m_; ++i) {
          if (d[i] <= 0.0 || x[i] >= xmax_[i]) continue;  // capped: flat
          s += W_.w[free[r]][i] * W_.w[free[c]][i] * x[i] / d[i];
        }
        H[r][c] = H[c][r] = s / beta_;
      }
      H[r][n] = grad[free[r]];
      diag_hi = std::max(diag_hi, H[r][r]);
    }
    if (diag_hi <= 0.0) return false;
    const double ridge = 1e-11 * diag_hi;
    for (std::size_t r = 0; r < n; ++r) H[r][r] += ridge;
    // Solve H s = grad_free.
    for (std::size_t col = 0; col < n; ++col) {
      std::size_t piv = col;
      for (std::size_t r = col + 1; r < n; ++r) {
        if (std::abs(H[r][col]) > std::abs(H[piv][col])) piv = r;
      }
      if (std::abs(H[piv][col]) < 1e-300) return false;
      std::swap(H[col], H[piv]);
      for (std::size_t r = 0; r < n; ++r) {
        if (r == col) continue;
        const double f = H[r][col] / H[col][col];
        for (std::size_t c = col; c <= n; ++c) H[r][c] -= f * H[col][c];
      }
    }
    std::vector<double> step(n);
    for (std::size_t r = 0; r < n; ++r) step[r] = H[r][n] / H[r][r];

    for (double t = 1.0; t >= 0x1p-40; t *= 0.5) {
      lam_try = lam;
      for (std::size_t r = 0; r < n; ++r) {
        lam_try[free[r]] = std::max(0.0, lam[free[r]] - t * step[r]);
      }
      primal_of(lam_try, x_try);
      const double q_try = dual_value(lam_try, x_try);
      const double q_slack = 1e-12 * (1.0 + std::abs(q));
      if (q_try < q || (q_try <= q + q_slack && pgrad_of(lam_try, x_try) <= 0.7 * pgrad)) {
        lam.swap(lam_try);
        x.swap(x_try);
        q = q_try;
        return true;
      }
    }
    return false;
  }

  const AllocationProblem& p_;
  const Working& W_;
  double beta_;
  std::size_t m_;
  std::vector<double> xmax_;
};

}  // namespace

double alpha_objective_of(const AllocationProblem& problem, const std::vector<double>& x,
                          double beta) {
  double acc = 0.0;
  for (std::size_t i = 0; i < problem.analysts(); ++i) {
    const double v = problem.mu[i] * problem.weight[i] * x[i];
    if (v <= 0.0) {
      if (beta > 1.0) return kNegInf;
      continue;
    }
    acc += std::pow(v, 1.0 - beta);
  }
  return acc / (1.0 - beta);
}

double phi_of(const AllocationProblem& problem, const std::vector<double>& x,
              const FairnessParams& params) {
  return phi_impl(problem, params, x);
}

AnalystAllocation solve_allocation(const AllocationProblem& problem, const FairnessParams& params,
                                   const SolverOptions& options) {
  validate_problem(problem);
  const std::size_t m = problem.analysts();
  Working W = build_working(problem);

  // Feasible start that shares every block evenly among its demanders:
  // x_i = min over demanded blocks of cap_k / (n_k w_ik). Each block's
  // load is then at most cap_k, and one congested block cannot crush
  // analysts that never asked for it.
  std::vector<double> x(m, std::numeric_limits<double>::infinity());
  {
    std::vector<int> demanders(W.blocks, 0);
    for (std::size_t k = 0; k < W.blocks; ++k) {
      for (std::size_t i = 0; i < m; ++i) demanders[k] += W.w[k][i] > 0.0 ? 1 : 0;
    }
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < W.blocks; ++k) {
        if (W.w[k][i] > 0.0) {
          x[i] = std::min(x[i], W.cap[k] / (static_cast<double>(demanders[k]) * W.w[k][i]));
        }
      }
      if (!std::isfinite(x[i])) x[i] = 1.0 / (static_cast<double>(m) * problem.mu[i]);
    }
  }

  AnalystAllocation result;
  double phi_x = phi_impl(problem, params, x);
  std::vector<double> grad = phi_gradient(problem, params, x);
  result.trace.push_back(phi_x);

  double grad_hi = 0.0;
  for (double gi : grad) grad_hi = std::max(grad_hi, std::abs(gi));
  double alpha = grad_hi > 0.0 ? 1.0 / grad_hi : 1.0;

  // Periodic polish attempts finish the run early once the active set has
  // settled; the gradient phase only has to get close.
  std::vector<double> lam(W.blocks, 0.0);
  bool polished = false;
  auto try_dual_finish = [&] {
    if (!params.alpha_fair()) return false;
    // Seed the multipliers from the current primal iterate: the duals of
    // the near-tight rows that best explain its gradient.
    std::vector<std::size_t> candidates;
    for (std::size_t k = 0; k < W.blocks; ++k) {
      if (W.wnorm2[k] <= 0.0) continue;
      if (W.cap[k] - load_of(W, k, x) <= 1e-3 * W.cap[k]) candidates.push_back(k);
    }
    std::vector<double> seed;
    std::vector<double> g13(m);
    bool finite_grad = true;
    for (std::size_t i = 0; i < m; ++i) {
      g13[i] = grad13(problem, params.beta, i, std::max(x[i], 1e-300));
      finite_grad = finite_grad && std::isfinite(g13[i]);
    }
    if (finite_grad && !candidates.empty()) seed = nnls_multipliers(W, g13, candidates);

    std::vector<double> x_dual;
    std::vector<double> lam_dual;
    DualNewton finisher(problem, W, params.beta);
    if (!finisher.solve(std::move(seed), x_dual, lam_dual)) return false;
    const double sr = scaled_residual(problem, W, params, x_dual, lam_dual);
    const double phi_new = phi_impl(problem, params, x_dual);
    if (sr > options.tol) {
      // Keep an improving point anyway: the next attempt re-seeds from it
      // and converges where a cold retry would stall the same way.
      if (phi_new > phi_x) {
        x = std::move(x_dual);
        phi_x = phi_new;
        result.trace.push_back(phi_x);
      }
      return false;
    }
    if (!(phi_new >= phi_x - 1e-9 * (1.0 + std::abs(phi_x)))) return false;
    x = std::move(x_dual);
    lam = std::move(lam_dual);
    if (phi_new > phi_x) {
      phi_x = phi_new;
      result.trace.push_back(phi_x);
    }
    return true;
  };

  std::vector<double> x_prev = x;
  std::vector<double> grad_prev = grad;
  int iter = 0;
  for (; iter < options.max_iter; ++iter) {
    if (iter % 40 == 0 && iter > 0 && (polished = try_dual_finish())) break;
    std::vector<double> trial(m);
    for (std::size_t i = 0; i < m; ++i) trial[i] = x[i] + alpha * grad[i];
    std::vector<double> proj = project_feasible(W, std::move(trial));
    std::vector<double> dir(m);
    double step_inf = 0.0;
    double x_inf = 0.0;
    double gd = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      dir[i] = proj[i] - x[i];
      gd += grad[i] * dir[i];
      step_inf = std::max(step_inf, std::abs(dir[i]));
      x_inf = std::max(x_inf, std::abs(x[i]));
    }
    if (step_inf <= 1e-13 * (1.0 + x_inf)) break;
    if (gd <= 0.0) break;

    double t = 1.0;
    bool accepted = false;
    for (int half = 0; half < 50; ++half) {
      std::vector<double> cand(m);
      for (std::size_t i = 0; i < m; ++i) cand[i] = x[i] + t * dir[i];
      const double phi_cand = phi_impl(problem, params, cand);
      if (phi_cand >= phi_x + options.armijo * t * gd) {
        x_prev = x;
        grad_prev = grad;
        x = std::move(cand);
        phi_x = phi_cand;
        grad = phi_gradient(problem, params, x);
        result.trace.push_back(phi_x);
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;

    // Spectral (Barzilai-Borwein) step for the next iteration.
    double ss = 0.0;
    double sy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double s = x[i] - x_prev[i];
      ss += s * s;
      sy += s * (grad_prev[i] - grad[i]);
    }
    if (sy > 1e-300 && ss > 0.0) {
      alpha = std::clamp(ss / sy, options.step_min, options.step_max);
    } else {
      alpha = std::min(alpha * 2.0, options.step_max);
    }
  }
  result.iterations = iter;

  // Multipliers: exact dual polish when the utility reduces to the
  // alpha-fairness objective, gradient-matching estimate otherwise.
  if (!polished) polished = try_dual_finish();
  if (!polished) {
    std::vector<std::size_t> candidates;
    for (std::size_t k = 0; k < W.blocks; ++k) {
      if (W.wnorm2[k] <= 0.0) continue;
      if (W.cap[k] - load_of(W, k, x) <= 1e-4 * W.cap[k]) candidates.push_back(k);
    }
    if (candidates.empty()) {
      for (std::size_t k = 0; k < W.blocks; ++k) {
        if (W.wnorm2[k] > 0.0) candidates.push_back(k);
      }
    }
    std::vector<double> g = params.alpha_fair() ? std::vector<double>(m)
                                                : phi_gradient(problem, params, x);
    bool finite = true;
    for (std::size_t i = 0; i < m; ++i) {
      if (params.alpha_fair()) g[i] = grad13(problem, params.beta, i, std::max(x[i], 1e-300));
      finite = finite && std::isfinite(g[i]);
    }
    if (finite) lam = nnls_multipliers(W, g, candidates);
  }

  result.x = x;
  result.multipliers = lam;
  result.phi = phi_x;
  result.objective = alpha_objective_of(problem, x, params.beta);
  result.kkt = scaled_residual(problem, W, params, x, lam);
  result.shares.assign(m, std::vector<double>(W.blocks, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < W.blocks; ++k) {
      result.shares[i][k] = problem.gamma[i][k] * problem.weight[i] * x[i];
    }
  }
  if (result.kkt > options.tol) {
    throw SolverDiverged("allocation solver did not reach tolerance", result.x, result.kkt);
  }
  return result;
}

std::vector<double> closed_form_single_resource(const std::vector<double>& gammas,
                                                const std::vector<double>& mus,
                                                const std::vector<double>& a, double beta) {
  const std::size_t m = gammas.size();
  if (mus.size() != m || a.size() != m || m == 0) throw ConfigError("closed form shape mismatch");
  if (!(beta > 0.0) || beta == 1.0) throw ConfigError("beta must be positive and != 1");
  double denom_sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!(gammas[i] > 0.0 && mus[i] > 0.0 && a[i] > 0.0)) {
      throw ConfigError("closed form requires positive inputs");
    }
    denom_sum += std::exp((beta - 1.0) / beta * std::log(gammas[i] / mus[i]));
  }
  std::vector<double> x(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double log_num = -std::log(gammas[i] * a[i]) / beta;
    const double log_den = (beta - 1.0) / beta * std::log(mus[i] * a[i]) + std::log(denom_sum);
    x[i] = std::exp(log_num - log_den);
  }
  return x;
}

double kkt_residual(const AnalystAllocation& allocation, const AllocationProblem& problem,
                    const FairnessParams& params) {
  validate_problem(problem);
  Working W = build_working(problem);
  const std::vector<double>& x = allocation.x;
  const std::vector<double>& lam = allocation.multipliers;
  if (x.size() != problem.analysts() || lam.size() != problem.blocks()) {
    throw ConfigError("allocation does not match problem shape");
  }
  std::vector<double> phig;
  if (!params.alpha_fair()) phig = phi_gradient(problem, params, x);
  double gap = 0.0;
  for (std::size_t i = 0; i < problem.analysts(); ++i) {
    const double gi = params.alpha_fair()
                          ? grad13(problem, params.beta, i, std::max(x[i], 1e-300))
                          : phig[i];
    double dual = 0.0;
    for (std::size_t k = 0; k < W.blocks; ++k) dual += lam[k] * W.w[k][i];
    gap = std::max(gap, std::abs(gi - dual));
  }
  double cs = 0.0;
  for (std::size_t k = 0; k < W.blocks; ++k) {
    cs = std::max(cs, std::abs(lam[k] * (load_of(W, k, x) - W.cap[k])));
  }
  return gap + cs;
}

Sub1Result solve_subproblem1(const std::vector<AnalystDemand>& analysts,
                             const FairnessParams& params,
                             const std::map<BlockId, double>& capacities,
                             const SolverOptions& options) {
  Sub1Result out;
  for (const auto& [block_id, cap] : capacities) {
    if (!(cap > 0.0 && cap <= 1.0 + kEpsTol)) {
      throw ConfigError("capacity for block " + block_id + " outside (0, 1]");
    }
    out.block_order.push_back(block_id);
  }

  std::map<BlockId, std::size_t> block_index;
  for (std::size_t k = 0; k < out.block_order.size(); ++k) block_index[out.block_order[k]] = k;

  for (const AnalystDemand& analyst : analysts) {
    bool positive = false;
    for (const auto& [block_id, g] : analyst.gamma) positive = positive || g > 0.0;
    if (!positive || analyst.mu <= 0.0) {
      out.x[analyst.analyst_id] = 0.0;
      continue;
    }
    out.analyst_order.push_back(analyst.analyst_id);
    out.problem.mu.push_back(analyst.mu);
    out.problem.weight.push_back(waiting_coeff(analyst.waiting_time, params.rho) * analyst.loss);
    std::vector<double> row(out.block_order.size(), 0.0);
    for (const auto& [block_id, g] : analyst.gamma) {
      auto it = block_index.find(block_id);
      if (it == block_index.end()) {
        throw UnknownBlock("analyst " + analyst.analyst_id + " demands uncapacitated block " +
                           block_id);
      }
      row[it->second] = g;
    }
    out.problem.gamma.push_back(std::move(row));
  }
  out.problem.capacity.reserve(out.block_order.size());
  for (const BlockId& id : out.block_order) out.problem.capacity.push_back(capacities.at(id));

  if (out.problem.analysts() > 0) {
    out.allocation = solve_allocation(out.problem, params, options);
    for (std::size_t i = 0; i < out.analyst_order.size(); ++i) {
      out.x[out.analyst_order[i]] = out.allocation.x[i];
    }
  }
  return out;
}

}  // namespace dpbalance
