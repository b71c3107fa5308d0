#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dpbalance/ledger.hpp"
#include "dpbalance/rng.hpp"

using namespace dpbalance;

namespace {

PrivacyBlock make_block(const char* id, double budget, double consumed = 0.0) {
  PrivacyBlock b;
  b.device_id = "dev";
  b.block_id = id;
  b.budget_eps = budget;
  b.consumed_eps = consumed;
  return b;
}

}  // namespace

TEST_CASE("sequential composition sums losses") {
  CHECK(compose_sequential({0.3, 0.2}) == doctest::Approx(0.5));
  CHECK(compose_sequential({}) == 0.0);
  CHECK(compose_sequential({0.1}) == doctest::Approx(0.1));
  CHECK_THROWS_AS(compose_sequential({0.1, -0.2}), InvalidEpsilon);
}

TEST_CASE("parallel composition takes the max") {
  CHECK(compose_parallel({0.3, 0.2}) == doctest::Approx(0.3));
  CHECK(compose_parallel({0.5, 0.5, 0.5}) == doctest::Approx(0.5));
  CHECK(compose_parallel({}) == 0.0);
  CHECK_THROWS_AS(compose_parallel({-0.1}), InvalidEpsilon);
}

TEST_CASE("charge accumulates and enforces the budget bound") {
  PrivacyBlock b = make_block("b", 1.0);
  b = charge(b, 0.5);
  CHECK(b.consumed_eps == doctest::Approx(0.5));

  PrivacyBlock nearly = make_block("b", 1.0, 0.9);
  CHECK_THROWS_AS(charge(nearly, 0.2), BudgetExceeded);

  PrivacyBlock same = charge(b, 0.0);
  CHECK(same.consumed_eps == b.consumed_eps);

  // Exact fit must pass despite floating-point accumulation.
  PrivacyBlock exact = make_block("b", 1.0);
  exact = charge(exact, 0.5);
  exact = charge(exact, 0.5);
  CHECK(exact.consumed_eps == doctest::Approx(1.0));
  CHECK(remaining_fraction(exact) == 0.0);
}

TEST_CASE("remaining fraction clamps and degenerates") {
  CHECK(remaining_fraction(make_block("b", 1.0, 0.3)) == doctest::Approx(0.7));
  CHECK(remaining_fraction(make_block("b", 2.0, 2.0)) == 0.0);
  CHECK(remaining_fraction(make_block("b", 1.5)) == 1.0);
  CHECK(remaining_fraction(make_block("b", 0.0)) == 0.0);
}

TEST_CASE("charges reconcile with sequential composition") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    PrivacyBlock b = make_block("b", 2.0);
    std::vector<double> charges;
    double last_fraction = 1.0;
    for (int step = 0; step < 20; ++step) {
      const double eps = rng.uniform(0.0, 0.2);
      if (b.consumed_eps + eps > b.budget_eps + kEpsTol) break;
      b = charge(b, eps);
      charges.push_back(eps);
      const double frac = remaining_fraction(b);
      CHECK(frac <= last_fraction);
      last_fraction = frac;
    }
    CHECK(b.consumed_eps == compose_sequential(charges));
    CHECK(b.consumed_eps <= b.budget_eps + kEpsTol);
  }
}

TEST_CASE("device-level parallel composition stays within the global budget") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const double global_budget = rng.uniform(0.5, 2.0);
    std::vector<double> losses;
    for (int j = 0; j < 6; ++j) {
      PrivacyBlock b = make_block("b", global_budget);
      for (int step = 0; step < 5; ++step) {
        const double eps = rng.uniform(0.0, 0.4);
        if (b.consumed_eps + eps > b.budget_eps + kEpsTol) continue;
        b = charge(b, eps);
      }
      losses.push_back(b.consumed_eps);
    }
    CHECK(compose_parallel(losses) <= global_budget + kEpsTol);
  }
}

TEST_CASE("ledger tracks retirement and creation order") {
  Ledger ledger;
  DeviceProfile device;
  device.device_id = "dev";
  device.global_budget = 1.0;
  device.blocks_per_round = 2;
  ledger.add_device(device);

  for (int j = 0; j < 4; ++j) {
    PrivacyBlock b = make_block(("b" + std::to_string(j)).c_str(), 1.0);
    b.created_round = j;
    ledger.add_block(b);
  }
  CHECK(ledger.device_block_count("dev") == 4);

  ledger.charge_fraction("b3", 1.0);
  CHECK(ledger.is_retired("b3"));
  CHECK_FALSE(ledger.is_retired("b2"));

  const auto latest = ledger.latest_blocks("dev", 2);
  REQUIRE(latest.size() == 2);
  CHECK(latest[0] == "b2");
  CHECK(latest[1] == "b1");

  CHECK(ledger.live_blocks().size() == 3);
  CHECK_THROWS_AS(ledger.block("nope"), UnknownBlock);

  // Ledgers copy by value; the copy is independent.
  Ledger copy = ledger;
  copy.charge_fraction("b0", 1.0);
  CHECK(copy.is_retired("b0"));
  CHECK_FALSE(ledger.is_retired("b0"));
}
