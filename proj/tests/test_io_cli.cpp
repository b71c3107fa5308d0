#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <string>

#include "dpbalance/io.hpp"

using namespace dpbalance;

namespace {

const std::string kSourceDir = SOURCE_DIR;

}  // namespace

TEST_CASE("the shipped fixture file equals the built-in fixture") {
  const Fixture from_file = load_demand_file(kSourceDir + "/fixtures/fig2.json");
  const Fixture built_in = fig2_fixture();
  CHECK(demand_to_json(from_file) == demand_to_json(built_in));
}

TEST_CASE("demand files round trip") {
  const Fixture fx = fig2_fixture();
  const std::string text = demand_to_json(fx);
  const Fixture parsed = parse_demand_json(text);
  CHECK(demand_to_json(parsed) == text);
  CHECK(parsed.pipelines.size() == 4);
  CHECK(parsed.ledger.block("B1").budget_eps == doctest::Approx(1.0));
}

TEST_CASE("demand validation catches malformed files") {
  CHECK_THROWS_AS(parse_demand_json("not json"), ConfigError);
  CHECK_THROWS_AS(parse_demand_json("{}"), ConfigError);
  CHECK_THROWS_AS(parse_demand_json(R"({"blocks":[{"id":"B1","budget":0.0}],"analysts":[]})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_demand_json(R"({"blocks":[{"id":"B1","budget":1.0}],
    "analysts":[{"id":"A","pipelines":[{"id":"p","demands":{}}]}]})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_demand_json(R"({"blocks":[{"id":"B1","budget":1.0}],
    "analysts":[{"id":"A","pipelines":[{"id":"p","demands":{"B1":0.2},
    "losses":{"B1":2.0}}]}]})"),
                  ConfigError);
}

TEST_CASE("csv schema is pinned") {
  CHECK(csv_header() ==
        "round,scheduler,beta,lambda,round_eff,round_fair,cum_eff,cum_fair,"
        "pipelines_allocated,pipeline_units,blocks_retired");
  RoundMetrics row;
  row.round = 3;
  row.round_efficiency = 1.0 / 3.0;
  row.round_fairness = -2.0;
  row.cumulative_efficiency = 0.5;
  row.cumulative_fairness = -4.25;
  row.pipelines_allocated = 7;
  row.pipeline_units = 8.25;
  row.blocks_retired = 1;
  CHECK(csv_row(row, "dpbalance", 2.2, (2.2 - 1.0) / 2.2) ==
        "3,dpbalance,2.2,0.545454545455,0.333333333333,-2,0.5,-4.25,7,8.25,1");
}

TEST_CASE("numbers are serialized with 12 significant digits") {
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(1.0 / 3.0) == "0.333333333333");
  CHECK(format_number(2.25) == "2.25");
  CHECK(format_number(1234567.0) == "1234567");
}

TEST_CASE("config files parse with overrides and validation") {
  const SimulationSpec spec = load_config_file(kSourceDir + "/configs/desk.json");
  CHECK(spec.workload.device_count == 10);
  CHECK(spec.workload.blocks_per_round == 2);
  CHECK(spec.workload.seed == 42);
  CHECK(spec.beta == doctest::Approx(2.2));
  CHECK(spec.lambda == -1.0);
  CHECK(spec.scheduler == SchedulerKind::DPBalance);
  CHECK(spec.rounds == 10);

  const std::string round_trip = config_to_json(spec);
  const SimulationSpec again = parse_config_json(round_trip);
  CHECK(config_to_json(again) == round_trip);

  CHECK_THROWS_AS(parse_config_json("{"), ConfigError);
  CHECK_THROWS_AS(parse_config_json("{}"), ConfigError);
  CHECK_THROWS_AS(parse_config_json(R"({"workload":{"device_count":0}})"), ConfigError);
  CHECK_THROWS_AS(load_config_file("/nonexistent/config.json"), ConfigError);

  std::string bad_beta = round_trip;
  const auto pos = bad_beta.find("\"beta\": 2.2");
  REQUIRE(pos != std::string::npos);
  bad_beta.replace(pos, 11, "\"beta\": 1.0");
  CHECK_THROWS_AS(parse_config_json(bad_beta), ConfigError);
}

TEST_CASE("property reports serialize with verdicts") {
  const auto reports = run_property_regime("thm6", 1, 0);
  const std::string text = reports_to_json(reports);
  CHECK(text.find("\"verdict\": \"holds\"") != std::string::npos);
  CHECK(text.find("no-tradeoff-equal") != std::string::npos);

  const auto broken = run_property_regime("thm2b", 3, 0);
  const std::string bad = reports_to_json(broken);
  CHECK(bad.find("\"verdict\": \"violated\"") != std::string::npos);
  CHECK(bad.find("\"witness\"") != std::string::npos);
}

TEST_CASE("solver allocations serialize by analyst and block id") {
  const Fixture fx = fig2_fixture();
  std::vector<AnalystDemand> analysts = {
      aggregate_analyst({fx.pipelines[0], fx.pipelines[1]}, 0, fx.ledger),
      aggregate_analyst({fx.pipelines[2], fx.pipelines[3]}, 0, fx.ledger),
  };
  const Sub1Result result =
      solve_subproblem1(analysts, FairnessParams(2.2), {{"B1", 1.0}, {"B2", 1.0}});
  const std::string text = allocation_to_json(result);
  CHECK(text.find("\"Alice\"") != std::string::npos);
  CHECK(text.find("\"B2\"") != std::string::npos);
  CHECK(text.find("\"objective\"") != std::string::npos);
  // Alice's x lands at 0.625.
  CHECK(text.find("0.625") != std::string::npos);
}

TEST_CASE("file helpers report failures as config errors") {
  CHECK_THROWS_AS(read_file("/no/such/file"), ConfigError);
  CHECK_THROWS_AS(write_file("/no/such/dir/file.csv", "x"), ConfigError);
  const std::string path = "/tmp/dpbalance_io_test.txt";
  write_file(path, "hello");
  CHECK(read_file(path) == "hello");
  std::remove(path.c_str());
}
