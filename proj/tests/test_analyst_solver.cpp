#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dpbalance/econ_properties.hpp"
#include "dpbalance/rng.hpp"
#include "oracles.hpp"

using namespace dpbalance;

namespace {

AllocationProblem random_instance(Rng& rng, std::size_t m, std::size_t K) {
  AllocationProblem p;
  p.capacity.assign(K, 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> row(K, 0.0);
    bool any = false;
    for (std::size_t k = 0; k < K; ++k) {
      if (rng.bernoulli(0.75)) {
        row[k] = rng.uniform(0.05, 0.9);
        any = true;
      }
    }
    if (!any) row[rng.next_below(K)] = rng.uniform(0.05, 0.9);
    p.mu.push_back(*std::max_element(row.begin(), row.end()));
    p.weight.push_back(rng.bernoulli(0.5) ? 1.0 : rng.uniform(0.6, 1.0));
    p.gamma.push_back(std::move(row));
  }
  return p;
}

double block_load(const AllocationProblem& p, const std::vector<double>& x, std::size_t k) {
  double load = 0.0;
  for (std::size_t i = 0; i < p.analysts(); ++i) load += p.gamma[i][k] * p.weight[i] * x[i];
  return load;
}

}  // namespace

TEST_CASE("worked two-analyst instance lands on the known optimum") {
  const AllocationProblem problem = fig2_problem();
  FairnessParams params(2.2);
  const AnalystAllocation allocation = solve_allocation(problem, params);

  CHECK(allocation.x[0] == doctest::Approx(0.625).epsilon(1e-8));
  CHECK(allocation.x[1] == doctest::Approx(5.0 / 7.0).epsilon(1e-8));
  // Granted shares: Alice (0.5, 0.5), Bob (0.5, 3/7).
  CHECK(allocation.shares[0][0] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(allocation.shares[0][1] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(allocation.shares[1][0] == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(allocation.shares[1][1] == doctest::Approx(3.0 / 7.0).epsilon(1e-8));
  // Only the first block binds.
  CHECK(allocation.multipliers[0] > 0.0);
  CHECK(allocation.multipliers[1] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(kkt_residual(allocation, problem, params) < 1e-6);
}

TEST_CASE("two identical analysts split one block evenly for any beta") {
  for (double beta : {0.5, 2.0, 5.0}) {
    AllocationProblem p;
    p.mu = {0.6, 0.6};
    p.weight = {1.0, 1.0};
    p.gamma = {{0.6}, {0.6}};
    p.capacity = {1.0};
    const AnalystAllocation allocation = solve_allocation(p, FairnessParams(beta));
    CHECK(allocation.x[0] == doctest::Approx(allocation.x[1]).epsilon(1e-9));
    CHECK(0.6 * allocation.x[0] == doctest::Approx(0.5).epsilon(1e-8));
  }
}

TEST_CASE("closed form: symmetric analysts share equally") {
  for (int m : {2, 3, 5}) {
    std::vector<double> ones(m, 1.0);
    const std::vector<double> x = closed_form_single_resource(ones, ones, ones, 2.0);
    for (double xi : x) CHECK(xi == doctest::Approx(1.0 / m).epsilon(1e-12));
  }
}

TEST_CASE("closed form matches the solver on one-block instances") {
  // The module's worked heterogeneous case first.
  {
    const std::vector<double> gammas = {0.8, 0.4};
    const std::vector<double> mus = {0.8, 0.6};
    const std::vector<double> a = {1.0, 1.0};
    const std::vector<double> x = closed_form_single_resource(gammas, mus, a, 2.0);
    AllocationProblem p;
    p.mu = mus;
    p.weight = a;
    p.gamma = {{gammas[0]}, {gammas[1]}};
    p.capacity = {1.0};
    const AnalystAllocation allocation = solve_allocation(p, FairnessParams(2.0));
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(allocation.x[i] == doctest::Approx(x[i]).epsilon(1e-6));
    }
    double consumed = 0.0;
    for (std::size_t i = 0; i < 2; ++i) consumed += gammas[i] * a[i] * x[i];
    CHECK(consumed == doctest::Approx(1.0).epsilon(1e-12));
  }

  Rng rng(314);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = 2 + rng.next_below(4);
    std::vector<double> gammas, mus, a;
    for (std::size_t i = 0; i < m; ++i) {
      mus.push_back(rng.uniform(0.2, 0.95));
      gammas.push_back(mus.back() * rng.uniform(0.2, 1.0));
      a.push_back(rng.uniform(0.5, 1.0));
    }
    const double beta = (trial % 3 == 0) ? 0.5 : (trial % 3 == 1 ? 2.0 : 5.0);
    const std::vector<double> closed = closed_form_single_resource(gammas, mus, a, beta);

    AllocationProblem p;
    p.mu = mus;
    p.weight = a;
    for (std::size_t i = 0; i < m; ++i) p.gamma.push_back({gammas[i]});
    p.capacity = {1.0};
    const AnalystAllocation allocation = solve_allocation(p, FairnessParams(beta));
    for (std::size_t i = 0; i < m; ++i) {
      CHECK(allocation.x[i] == doctest::Approx(closed[i]).epsilon(1e-6));
    }
  }
}

TEST_CASE("closed form below the equal split for beta < 1 with uneven ratios") {
  const std::vector<double> gammas = {0.8, 0.08};
  const std::vector<double> mus = {0.8, 0.8};
  const std::vector<double> a = {1.0, 1.0};
  const std::vector<double> x = closed_form_single_resource(gammas, mus, a, 0.5);
  double lowest = 1e9;
  for (std::size_t i = 0; i < 2; ++i) lowest = std::min(lowest, mus[i] * a[i] * x[i]);
  CHECK(lowest < 0.5);
}

TEST_CASE("solver beats the grid oracle on random instances") {
  Rng rng(2718);
  for (int trial = 0; trial < 36; ++trial) {
    const std::size_t m = 2 + rng.next_below(3);
    const std::size_t K = 1 + rng.next_below(3);
    const AllocationProblem p = random_instance(rng, m, K);
    const double beta = (trial % 3 == 0) ? 0.5 : (trial % 3 == 1 ? 2.0 : 5.0);
    const AnalystAllocation allocation = solve_allocation(p, FairnessParams(beta));

    const int steps = m == 2 ? 200 : (m == 3 ? 48 : 24);
    const double oracle_value = oracle::grid_search_objective(p, beta, steps);
    CHECK(allocation.objective >= oracle_value - 1e-3 * std::abs(oracle_value));

    for (std::size_t k = 0; k < K; ++k) {
      CHECK(block_load(p, allocation.x, k) <= p.capacity[k] + 1e-9);
    }
  }
}

TEST_CASE("solver is order independent") {
  Rng rng(11);
  const AllocationProblem p = random_instance(rng, 4, 3);
  const AnalystAllocation base = solve_allocation(p, FairnessParams(2.2));

  AllocationProblem permuted;
  const std::vector<std::size_t> perm = {2, 0, 3, 1};
  permuted.capacity = p.capacity;
  for (std::size_t i : perm) {
    permuted.mu.push_back(p.mu[i]);
    permuted.weight.push_back(p.weight[i]);
    permuted.gamma.push_back(p.gamma[i]);
  }
  const AnalystAllocation shuffled = solve_allocation(permuted, FairnessParams(2.2));
  for (std::size_t pos = 0; pos < perm.size(); ++pos) {
    CHECK(shuffled.x[pos] == doctest::Approx(base.x[perm[pos]]).epsilon(1e-9));
  }
}

TEST_CASE("iterate objectives never decrease") {
  Rng rng(5150);
  for (int trial = 0; trial < 10; ++trial) {
    const AllocationProblem p = random_instance(rng, 3, 2);
    const AnalystAllocation allocation = solve_allocation(p, FairnessParams(2.0));
    for (std::size_t i = 1; i < allocation.trace.size(); ++i) {
      CHECK(allocation.trace[i] >=
            allocation.trace[i - 1] - 1e-12 * std::max(1.0, std::abs(allocation.trace[i - 1])));
    }
  }
}

TEST_CASE("kkt residual: near zero at the optimum, larger when perturbed") {
  Rng rng(404);
  for (int trial = 0; trial < 20; ++trial) {
    const AllocationProblem p = random_instance(rng, 3, 2);
    FairnessParams params(trial % 2 == 0 ? 2.0 : 5.0);
    AnalystAllocation allocation = solve_allocation(p, params);
    const double at_opt = kkt_residual(allocation, p, params);
    CHECK(at_opt < 1e-6);

    AnalystAllocation perturbed = allocation;
    perturbed.x[0] *= 1.01;
    CHECK(kkt_residual(perturbed, p, params) > at_opt);
  }
}

TEST_CASE("single analyst saturates its block with a positive multiplier") {
  AllocationProblem p;
  p.mu = {0.5};
  p.weight = {1.0};
  p.gamma = {{0.5}};
  p.capacity = {1.0};
  FairnessParams params(2.0);
  const AnalystAllocation allocation = solve_allocation(p, params);
  CHECK(allocation.x[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(allocation.multipliers[0] > 0.0);
  // Complementary slackness is exact: the constraint is tight.
  CHECK(block_load(p, allocation.x, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(kkt_residual(allocation, p, params) < 1e-8);
}

TEST_CASE("large beta approaches the max-min split") {
  const AllocationProblem p = no_tradeoff_equal_instance();
  const AnalystAllocation allocation = solve_allocation(p, FairnessParams(50.0));
  const double v0 = p.mu[0] * p.weight[0] * allocation.x[0];
  const double v1 = p.mu[1] * p.weight[1] * allocation.x[1];
  CHECK(v0 == doctest::Approx(0.75).epsilon(1e-6));
  CHECK(v1 == doctest::Approx(0.75).epsilon(1e-6));
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(block_load(p, allocation.x, k) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("adapter maps analysts and blocks through ids") {
  Fixture fx = fig2_fixture();
  std::vector<AnalystDemand> analysts = {
      aggregate_analyst({fx.pipelines[0], fx.pipelines[1]}, 0, fx.ledger),
      aggregate_analyst({fx.pipelines[2], fx.pipelines[3]}, 0, fx.ledger),
  };
  const std::map<BlockId, double> caps = {{"B1", 1.0}, {"B2", 1.0}};
  const Sub1Result result = solve_subproblem1(analysts, FairnessParams(2.2), caps);
  CHECK(result.x.at("Alice") == doctest::Approx(0.625).epsilon(1e-8));
  CHECK(result.x.at("Bob") == doctest::Approx(5.0 / 7.0).epsilon(1e-8));

  // Zero-demand analysts come back with x = 0 and stay out of the solve.
  AnalystDemand idle;
  idle.analyst_id = "Idle";
  idle.mu = 0.0;
  analysts.push_back(idle);
  const Sub1Result with_idle = solve_subproblem1(analysts, FairnessParams(2.2), caps);
  CHECK(with_idle.x.at("Idle") == 0.0);
  CHECK(with_idle.x.at("Alice") == doctest::Approx(0.625).epsilon(1e-8));
}

TEST_CASE("solver diverges loudly when starved of iterations") {
  AllocationProblem p;
  p.mu = {0.9, 0.5};
  p.weight = {1.0, 1.0};
  p.gamma = {{0.9, 0.2}, {0.4, 0.5}};
  p.capacity = {1.0, 1.0};
  FairnessParams params(2.0, 3.0);  // off the coupled regime: no polish
  SolverOptions options;
  options.max_iter = 0;
  options.tol = 1e-12;
  CHECK_THROWS_AS(solve_allocation(p, params, options), SolverDiverged);
  try {
    solve_allocation(p, params, options);
  } catch (const SolverDiverged& e) {
    CHECK(e.best_iterate.size() == 2);
    CHECK(e.best_residual > 0.0);
  }
}
