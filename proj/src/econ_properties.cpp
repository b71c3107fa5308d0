#include "dpbalance/econ_properties.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dpbalance/schedulers.hpp"

namespace dpbalance {

namespace {

constexpr double kOracleTol = 1e-7;

void add_violation(PropertyReport& report, std::uint64_t seed, std::string what,
                   std::vector<double> values) {
  PropertyViolation v;
  v.seed = seed;
  v.witness = std::move(what);
  v.values = std::move(values);
  report.violations.push_back(std::move(v));
}

std::vector<double> weighted_shares(const AllocationProblem& problem,
                                    const std::vector<double>& x) {
  std::vector<double> v(problem.analysts());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = problem.mu[i] * problem.weight[i] * x[i];
  return v;
}

}  // namespace

PropertyReport check_pareto(const AllocationProblem& problem, const AnalystAllocation& allocation,
                            const FairnessParams& params, std::uint64_t seed, int random_probes) {
  PropertyReport report;
  report.property = "pareto-efficiency";
  report.beta = params.beta;
  report.lambda = params.lambda;
  report.instances_tested = 1;

  const std::size_t m = problem.analysts();
  const std::size_t K = problem.blocks();
  std::vector<double> slack(K);
  for (std::size_t k = 0; k < K; ++k) {
    double load = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      load += problem.gamma[i][k] * problem.weight[i] * allocation.x[i];
    }
    slack[k] = problem.capacity[k] - load;
  }

  // Exact oracle: the largest single-coordinate raise that stays feasible.
  // Demands are nonnegative, so a feasible dominating point exists iff
  // some coordinate has headroom.
  for (std::size_t i = 0; i < m; ++i) {
    double headroom = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      const double w = problem.gamma[i][k] * problem.weight[i];
      if (w > 0.0) headroom = std::min(headroom, slack[k] / w);
    }
    if (std::isfinite(headroom) && headroom > kOracleTol) {
      add_violation(report, seed, "analyst " + std::to_string(i) + " can raise x feasibly",
                    {allocation.x[i], headroom});
    }
  }

  // Randomized dominating perturbations on top of the exact check.
  Rng rng = Rng::stream(seed, "pareto-probes", 0);
  for (int probe = 0; probe < random_probes; ++probe) {
    std::vector<double> cand = allocation.x;
    bool dominated = false;
    for (std::size_t i = 0; i < m; ++i) {
      if (rng.bernoulli(0.5)) {
        cand[i] += rng.uniform(0.0, 0.05 * (1.0 + cand[i]));
        dominated = true;
      }
    }
    if (!dominated) continue;
    bool feasible = true;
    for (std::size_t k = 0; k < K && feasible; ++k) {
      double load = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        load += problem.gamma[i][k] * problem.weight[i] * cand[i];
      }
      feasible = load <= problem.capacity[k];
    }
    if (feasible) {
      add_violation(report, seed, "random dominating perturbation is feasible", cand);
      break;
    }
  }
  return report;
}

PropertyReport check_sharing_incentive(const AllocationProblem& problem,
                                       const AnalystAllocation& allocation,
                                       const FairnessParams& params, std::uint64_t seed) {
  PropertyReport report;
  report.property = "sharing-incentive";
  report.beta = params.beta;
  report.lambda = params.lambda;
  report.instances_tested = 1;

  const double equal_share = 1.0 / static_cast<double>(problem.analysts());
  const std::vector<double> v = weighted_shares(problem, allocation.x);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < equal_share - kOracleTol) {
      add_violation(report, seed,
                    "analyst " + std::to_string(i) + " below the equal split", {v[i], equal_share});
    }
  }
  return report;
}

PropertyReport check_envy_freeness(const AllocationProblem& problem,
                                   const AnalystAllocation& allocation,
                                   const FairnessParams& params, std::uint64_t seed) {
  PropertyReport report;
  report.property = "envy-freeness";
  report.beta = params.beta;
  report.lambda = params.lambda;
  report.instances_tested = 1;

  const std::size_t m = problem.analysts();
  const std::size_t K = problem.blocks();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      // Scale j's granted bundle onto i's demand profile.
      double kappa = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < K; ++k) {
        if (problem.gamma[i][k] > 0.0) {
          kappa = std::min(kappa, problem.gamma[j][k] * allocation.x[j] / problem.gamma[i][k]);
        }
      }
      if (!std::isfinite(kappa)) continue;
      const double own = problem.mu[i] * problem.weight[i] * allocation.x[i];
      const double from_j = problem.mu[i] * problem.weight[i] * kappa;
      if (from_j > own + kOracleTol) {
        add_violation(report, seed,
                      "analyst " + std::to_string(i) + " envies analyst " + std::to_string(j),
                      {own, from_j});
      }
    }
  }
  return report;
}

SpShares sp_shares(const std::vector<double>& gammas, const std::vector<double>& mus,
                   const std::vector<double>& a, double beta, std::size_t analyst) {
  const std::vector<double> x = closed_form_single_resource(gammas, mus, a, beta);
  SpShares shares;
  shares.dominant = mus[analyst] * a[analyst] * x[analyst];
  shares.non_dominant = gammas[analyst] * a[analyst] * x[analyst];
  return shares;
}

PropertyReport check_strategy_proofness(const std::vector<double>& gammas,
                                        const std::vector<double>& mus,
                                        const std::vector<double>& a, double beta, double eta,
                                        std::uint64_t seed) {
  PropertyReport report;
  report.property = "weak-strategy-proofness";
  report.beta = beta;
  report.lambda = std::abs(1.0 - beta) / beta;
  report.instances_tested = 1;
  if (!(eta >= 1.0)) throw ConfigError("inflation factor must be >= 1");

  const std::size_t liar = 0;
  const SpShares base = sp_shares(gammas, mus, a, beta, liar);

  // Lie 1: inflate the dominant share only.
  std::vector<double> mu_lie = mus;
  mu_lie[liar] *= eta;
  const SpShares after_mu = sp_shares(gammas, mu_lie, a, beta, liar);
  if (beta > 1.0) {
    if (after_mu.dominant < base.dominant - kOracleTol) {
      add_violation(report, seed, "dominant share dropped under the dominant-share lie",
                    {base.dominant, after_mu.dominant});
    }
    if (after_mu.non_dominant > base.non_dominant + kOracleTol) {
      add_violation(report, seed, "non-dominant share rose under the dominant-share lie",
                    {base.non_dominant, after_mu.non_dominant});
    }
  } else {
    // In the beta < 1 regime both shares rise: the lie pays with no cost,
    // which is exactly the violation.
    if (after_mu.dominant > base.dominant + kOracleTol &&
        after_mu.non_dominant > base.non_dominant + kOracleTol) {
      add_violation(report, seed, "both shares rose under the dominant-share lie",
                    {base.dominant, after_mu.dominant, base.non_dominant, after_mu.non_dominant});
    }
  }

  // Lie 2: inflate the non-dominant share only; the dominant share must
  // not improve (beta > 1).
  std::vector<double> gamma_lie = gammas;
  gamma_lie[liar] *= eta;
  const SpShares after_gamma = sp_shares(gamma_lie, mus, a, beta, liar);
  if (beta > 1.0 && after_gamma.dominant > base.dominant + kOracleTol) {
    add_violation(report, seed, "dominant share rose under the non-dominant-share lie",
                  {base.dominant, after_gamma.dominant});
  }

  // Lie 3: proportional inflation changes nothing.
  std::vector<double> both_mu = mus;
  std::vector<double> both_gamma = gammas;
  both_mu[liar] *= eta;
  both_gamma[liar] *= eta;
  const SpShares after_both = sp_shares(both_gamma, both_mu, a, beta, liar);
  if (std::abs(after_both.dominant - base.dominant) > 1e-9 ||
      std::abs(after_both.non_dominant - base.non_dominant) > 1e-9) {
    add_violation(report, seed, "proportional lie moved the shares",
                  {base.dominant, after_both.dominant, base.non_dominant,
                   after_both.non_dominant});
  }
  return report;
}

std::vector<TradeoffPoint> tradeoff_sweep(const AllocationProblem& problem,
                                          const std::vector<double>& betas,
                                          const SolverOptions& options) {
  std::vector<TradeoffPoint> points;
  for (double beta : betas) {
    FairnessParams params(beta);
    const AnalystAllocation allocation = solve_allocation(problem, params, options);
    const std::vector<double> v = weighted_shares(problem, allocation.x);
    TradeoffPoint point;
    point.beta = beta;
    point.efficiency = dominant_efficiency(v);
    point.fairness_abs = std::abs(dominant_fairness(v, beta));
    points.push_back(point);
  }
  return points;
}

AllocationProblem fig2_problem() {
  AllocationProblem p;
  p.mu = {0.8, 0.7};
  p.weight = {1.0, 1.0};
  p.gamma = {{0.8, 0.8}, {0.7, 0.6}};
  p.capacity = {1.0, 1.0};
  return p;
}

AllocationProblem no_tradeoff_equal_instance() {
  // Per block, sum_i gamma_ik / mu_i = 4/3: equal weighted dominant
  // shares make every constraint tight at once.
  AllocationProblem p;
  p.mu = {0.9, 0.6};
  p.weight = {1.0, 1.0};
  p.gamma = {{0.9, 0.3}, {0.2, 0.6}};
  p.capacity = {1.0, 1.0};
  return p;
}

Fixture no_tradeoff_zero_fixture() {
  Fixture fx;
  DeviceProfile device;
  device.device_id = "dev-B";
  device.global_budget = 1.0;
  fx.ledger.add_device(device);
  PrivacyBlock block;
  block.device_id = "dev-B";
  block.block_id = "B";
  block.budget_eps = 1.0;
  fx.ledger.add_block(block);

  PipelineDemand big;
  big.analyst_id = "A1";
  big.pipeline_id = "A1:p0";
  big.demands = {{"B", 0.6}};
  big.losses = {{"B", 1.0}};
  PipelineDemand small;
  small.analyst_id = "A2";
  small.pipeline_id = "A2:p0";
  small.demands = {{"B", 0.3}};
  small.losses = {{"B", 1.0}};
  fx.pipelines = {big, small};
  return fx;
}

AllocationProblem random_property_instance(Rng& rng, bool unit_weights) {
  AllocationProblem p;
  const std::size_t m = 2 + rng.next_below(3);
  const std::size_t K = 1 + rng.next_below(3);
  p.capacity.assign(K, 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> row(K, 0.0);
    bool any = false;
    for (std::size_t k = 0; k < K; ++k) {
      if (rng.bernoulli(0.7)) {
        row[k] = rng.uniform(0.05, 0.9);
        any = true;
      }
    }
    if (!any) row[rng.next_below(K)] = rng.uniform(0.05, 0.9);
    p.mu.push_back(*std::max_element(row.begin(), row.end()));
    p.weight.push_back(unit_weights ? 1.0 : rng.uniform(0.6, 1.0));
    p.gamma.push_back(std::move(row));
  }
  return p;
}

std::vector<PropertyReport> run_property_regime(const std::string& regime, int instances,
                                                std::uint64_t seed, const SolverOptions& options) {
  const std::vector<double> hold_betas = {1.5, 2.2, 5.0};
  std::vector<PropertyReport> reports;

  auto batch = [&](const std::string& property, double beta, auto&& one_instance) {
    PropertyReport merged;
    merged.property = property;
    merged.beta = beta;
    merged.lambda = std::abs(1.0 - beta) / beta;
    merged.instances_tested = instances;
    for (int n = 0; n < instances; ++n) {
      PropertyReport single = one_instance(beta, static_cast<std::uint64_t>(n));
      for (PropertyViolation& v : single.violations) merged.violations.push_back(std::move(v));
      merged.lambda = single.lambda;
    }
    reports.push_back(std::move(merged));
  };

  if (regime == "thm1") {
    for (double beta : hold_betas) {
      batch("pareto-efficiency", beta, [&](double b, std::uint64_t n) {
        Rng rng = Rng::stream(seed, "thm1-inst", n);
        const AllocationProblem problem = random_property_instance(rng, false);
        FairnessParams params(b);
        const AnalystAllocation allocation = solve_allocation(problem, params, options);
        return check_pareto(problem, allocation, params, n);
      });
    }
  } else if (regime == "thm2a") {
    for (double beta : hold_betas) {
      batch("sharing-incentive", beta, [&](double b, std::uint64_t n) {
        Rng rng = Rng::stream(seed, "thm2a-inst", n);
        const AllocationProblem problem = random_property_instance(rng, false);
        FairnessParams params(b);
        const AnalystAllocation allocation = solve_allocation(problem, params, options);
        return check_sharing_incentive(problem, allocation, params, n);
      });
    }
  } else if (regime == "thm2b") {
    // Heterogeneous demand/dominant ratios on one shared block at
    // beta = 0.5: the high-ratio analyst lands below the equal split.
    batch("sharing-incentive", 0.5, [&](double b, std::uint64_t n) {
      Rng rng = Rng::stream(seed, "thm2b-inst", n);
      const std::size_t m = 2 + rng.next_below(3);
      AllocationProblem p;
      p.capacity = {1.0};
      for (std::size_t i = 0; i < m; ++i) {
        const double mu = rng.uniform(0.4, 0.9);
        const double ratio = i == 0 ? 1.0 : rng.uniform(0.1, 0.5);
        p.mu.push_back(mu);
        p.weight.push_back(1.0);
        p.gamma.push_back({mu * ratio});
      }
      FairnessParams params(b);
      const AnalystAllocation allocation = solve_allocation(p, params, options);
      return check_sharing_incentive(p, allocation, params, n);
    });
  } else if (regime == "thm3a") {
    for (double beta : hold_betas) {
      batch("envy-freeness", beta, [&](double b, std::uint64_t n) {
        Rng rng = Rng::stream(seed, "thm3a-inst", n);
        const AllocationProblem problem = random_property_instance(rng, true);
        FairnessParams params(b);
        const AnalystAllocation allocation = solve_allocation(problem, params, options);
        return check_envy_freeness(problem, allocation, params, n);
      });
    }
  } else if (regime == "thm3b") {
    // Same construction as thm2b: at beta = 0.5 the low-ratio analysts
    // walk away with bundles the high-ratio analyst would prefer scaled
    // onto its own profile.
    batch("envy-freeness", 0.5, [&](double b, std::uint64_t n) {
      Rng rng = Rng::stream(seed, "thm3b-inst", n);
      const std::size_t m = 2 + rng.next_below(3);
      AllocationProblem p;
      p.capacity = {1.0};
      for (std::size_t i = 0; i < m; ++i) {
        const double mu = rng.uniform(0.4, 0.9);
        const double ratio = i == 0 ? 1.0 : rng.uniform(0.1, 0.5);
        p.mu.push_back(mu);
        p.weight.push_back(1.0);
        p.gamma.push_back({mu * ratio});
      }
      FairnessParams params(b);
      const AnalystAllocation allocation = solve_allocation(p, params, options);
      return check_envy_freeness(p, allocation, params, n);
    });
  } else if (regime == "thm3d") {
    // Efficiency-heavy objective on the two-block construction: the
    // analyst confined to the shared block envies the other's bundle.
    batch("envy-freeness", 2.0, [&](double, std::uint64_t n) {
      Rng rng = Rng::stream(seed, "thm3d-inst", n);
      AllocationProblem p;
      p.mu = {1.0, 1.0};
      p.weight = {1.0, 1.0};
      const double overlap = rng.uniform(0.55, 0.9);
      p.gamma = {{1.0, overlap}, {0.0, 1.0}};
      p.capacity = {1.0, 1.0};
      FairnessParams params(2.0, 1000.0);
      SolverOptions loose = options;
      loose.tol = std::max(options.tol, 1e-5);
      const AnalystAllocation allocation = solve_allocation(p, params, loose);
      return check_envy_freeness(p, allocation, params, n);
    });
  } else if (regime == "thm4a") {
    for (double beta : hold_betas) {
      batch("weak-strategy-proofness", beta, [&](double b, std::uint64_t n) {
        Rng rng = Rng::stream(seed, "thm4a-inst", n);
        const std::size_t m = 2 + rng.next_below(3);
        std::vector<double> mus, gammas, a;
        for (std::size_t i = 0; i < m; ++i) {
          mus.push_back(rng.uniform(0.3, 0.9));
          gammas.push_back(mus.back() * rng.uniform(0.2, 0.6));
          a.push_back(rng.uniform(0.6, 1.0));
        }
        return check_strategy_proofness(gammas, mus, a, b, 1.5, n);
      });
    }
  } else if (regime == "thm4b") {
    batch("weak-strategy-proofness", 0.5, [&](double, std::uint64_t n) {
      Rng rng = Rng::stream(seed, "thm4b-inst", n);
      const std::size_t m = 2 + rng.next_below(3);
      std::vector<double> mus, gammas, a;
      for (std::size_t i = 0; i < m; ++i) {
        mus.push_back(rng.uniform(0.3, 0.9));
        gammas.push_back(mus.back() * rng.uniform(0.2, 0.6));
        a.push_back(rng.uniform(0.6, 1.0));
      }
      return check_strategy_proofness(gammas, mus, a, 0.5, 1.5, n);
    });
  } else if (regime == "thm6") {
    PropertyReport report;
    report.property = "no-tradeoff-equal";
    report.beta = 50.0;
    report.lambda = (50.0 - 1.0) / 50.0;
    report.instances_tested = 1;
    const AllocationProblem problem = no_tradeoff_equal_instance();
    FairnessParams params(50.0);
    const AnalystAllocation allocation = solve_allocation(problem, params, options);
    const std::vector<double> v = weighted_shares(problem, allocation.x);
    const double spread = *std::max_element(v.begin(), v.end()) -
                          *std::min_element(v.begin(), v.end());
    if (spread >= 1e-4) {
      add_violation(report, seed, "weighted dominant shares are not equal", v);
    }
    for (std::size_t k = 0; k < problem.blocks(); ++k) {
      double load = 0.0;
      for (std::size_t i = 0; i < problem.analysts(); ++i) {
        load += problem.gamma[i][k] * problem.weight[i] * allocation.x[i];
      }
      if (std::abs(load - problem.capacity[k]) > 1e-6) {
        add_violation(report, seed, "constraint " + std::to_string(k) + " is not tight",
                      {load, problem.capacity[k]});
      }
    }
    reports.push_back(std::move(report));
  } else if (regime == "thm7") {
    PropertyReport report;
    report.property = "no-tradeoff-zero-share";
    report.beta = 50.0;
    report.lambda = (50.0 - 1.0) / 50.0;
    report.instances_tested = 1;
    const Fixture fx = no_tradeoff_zero_fixture();
    FairnessParams params(50.0);
    const AllocationPlan plan = dpbalance_round(fx.ledger, fx.pipelines, 0, params, options);
    double lowest = std::numeric_limits<double>::infinity();
    std::vector<double> utilities;
    for (const auto& [id, outcome] : plan.per_analyst) {
      lowest = std::min(lowest, outcome.utility);
      utilities.push_back(outcome.utility);
    }
    if (!(lowest < 1e-3)) {
      add_violation(report, seed, "every analyst kept a weighted dominant share", utilities);
    }
    reports.push_back(std::move(report));
  } else {
    throw ConfigError("unknown property regime: " + regime);
  }
  return reports;
}

}  // namespace dpbalance
