#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpbalance/io.hpp"

namespace {

using namespace dpbalance;

std::vector<double> parse_betas(const std::string& csv) {
  std::vector<double> betas;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    betas.push_back(std::stod(item));
  }
  if (betas.empty()) throw ConfigError("no betas given");
  return betas;
}

int cmd_simulate(const std::string& config_path, const std::string& scheduler,
                 std::int64_t seed, int rounds, double beta, double lambda, const std::string& out) {
  SimulationSpec spec = load_config_file(config_path);
  if (!scheduler.empty()) spec.scheduler = scheduler_from_name(scheduler);
  if (seed >= 0) spec.workload.seed = static_cast<std::uint64_t>(seed);
  if (rounds > 0) spec.rounds = rounds;
  if (beta > 0.0) spec.beta = beta;
  if (lambda >= 0.0) spec.lambda = lambda;

  const MetricSeries series = run(spec);
  const double lambda_used =
      spec.lambda >= 0.0 ? spec.lambda : std::abs(1.0 - spec.beta) / spec.beta;
  write_metrics_csv(out, {{spec.beta, series}}, scheduler_name(spec.scheduler), lambda_used);

  const RoundMetrics& last = series.back();
  std::printf("scheduler=%s rounds=%d beta=%s cum_eff=%s cum_fair=%s\n",
              scheduler_name(spec.scheduler).c_str(), spec.rounds,
              format_number(spec.beta).c_str(),
              format_number(last.cumulative_efficiency).c_str(),
              format_number(last.cumulative_fairness).c_str());
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& scheduler,
              const std::string& betas_csv, std::int64_t seed, int rounds, int jobs,
              const std::string& out) {
  SimulationSpec spec = load_config_file(config_path);
  if (!scheduler.empty()) spec.scheduler = scheduler_from_name(scheduler);
  if (seed >= 0) spec.workload.seed = static_cast<std::uint64_t>(seed);
  if (rounds > 0) spec.rounds = rounds;
  const std::vector<double> betas = parse_betas(betas_csv);

  const auto results = sweep_beta(spec, betas, jobs);
  write_metrics_csv(out, results, scheduler_name(spec.scheduler), -1.0);
  for (const auto& [beta, series] : results) {
    std::printf("beta=%s round_eff=%s round_fair=%s cum_eff=%s cum_fair=%s\n",
                format_number(beta).c_str(),
                format_number(series.back().round_efficiency).c_str(),
                format_number(series.back().round_fairness).c_str(),
                format_number(series.back().cumulative_efficiency).c_str(),
                format_number(series.back().cumulative_fairness).c_str());
  }
  return 0;
}

int cmd_solve(const std::string& demands_path, double beta, double lambda, double rho,
              const std::string& out) {
  const Fixture fx = load_demand_file(demands_path);
  FairnessParams params(beta, lambda, rho);

  int round = 0;
  std::map<AnalystId, std::vector<PipelineDemand>> grouped;
  for (const PipelineDemand& p : fx.pipelines) {
    grouped[p.analyst_id].push_back(p);
    round = std::max(round, p.arrival_round);
  }
  std::vector<AnalystDemand> analysts;
  std::map<BlockId, double> capacities;
  for (const auto& [id, pipelines] : grouped) {
    analysts.push_back(aggregate_analyst(pipelines, round, fx.ledger));
    for (const auto& [block, g] : analysts.back().gamma) {
      capacities[block] = fx.ledger.remaining(block);
    }
  }
  const Sub1Result result = solve_subproblem1(analysts, params, capacities);
  const std::string text = allocation_to_json(result);
  if (out.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    write_file(out, text);
  }
  return 0;
}

int cmd_properties(const std::string& regime, int instances, std::int64_t seed,
                   const std::string& out) {
  const auto reports =
      run_property_regime(regime, instances, seed >= 0 ? static_cast<std::uint64_t>(seed) : 1);
  const std::string text = reports_to_json(reports);
  if (out.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    write_file(out, text);
  }
  for (const PropertyReport& report : reports) {
    if (!report.holds() &&
        (regime == "thm1" || regime == "thm2a" || regime == "thm3a" || regime == "thm4a" ||
         regime == "thm6" || regime == "thm7")) {
      return 1;
    }
  }
  return 0;
}

struct DemoCheck {
  bool ok = true;
  void close(const std::string& what, double got, double want, double tol) {
    if (std::abs(got - want) > tol) {
      std::printf("MISMATCH %s: got %s want %s (tol %s)\n", what.c_str(),
                  format_number(got).c_str(), format_number(want).c_str(),
                  format_number(tol).c_str());
      ok = false;
    }
  }
  void equal_set(const std::string& what, std::vector<std::string> got,
                 std::vector<std::string> want) {
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    if (got != want) {
      std::string g, w;
      for (const auto& s : got) g += s + " ";
      for (const auto& s : want) w += s + " ";
      std::printf("MISMATCH %s: got {%s} want {%s}\n", what.c_str(), g.c_str(), w.c_str());
      ok = false;
    }
  }
};

int cmd_demo_fig2() {
  const Fixture fx = fig2_fixture();
  DemoCheck check;

  for (const SchedulerKind kind :
       {SchedulerKind::DPBalance, SchedulerKind::DPF, SchedulerKind::DPK, SchedulerKind::FCFS}) {
    FairnessParams params(2.2);
    const AllocationPlan plan = run_scheduler(kind, fx.ledger, fx.pipelines, 0, params);

    std::vector<std::string> granted;
    for (const auto& [pipeline, kappa] : plan.per_pipeline) granted.push_back(pipeline);
    const double efficiency = dominant_efficiency(plan.utilities());

    std::map<BlockId, double> leftover = {{"B1", 1.0}, {"B2", 1.0}};
    for (const auto& [analyst, outcome] : plan.per_analyst) {
      for (const auto& [block, used] : outcome.consumed) leftover[block] -= used;
    }

    std::printf("%-9s grants:", scheduler_name(kind).c_str());
    for (const auto& [pipeline, kappa] : plan.per_pipeline) {
      std::printf(" %s(x%s)", pipeline.c_str(), format_number(kappa).c_str());
    }
    std::printf("  efficiency=%s units=%s leftover B1=%s B2=%s\n",
                format_number(efficiency).c_str(), format_number(plan.pipeline_units).c_str(),
                format_number(leftover["B1"]).c_str(), format_number(leftover["B2"]).c_str());
    for (const auto& [analyst, outcome] : plan.per_analyst) {
      std::string returns;
      for (const auto& [block, r] : outcome.returned) {
        if (r > 1e-9) returns += " " + block + "=" + format_number(r);
      }
      if (!returns.empty()) {
        std::printf("          %s returns%s\n", analyst.c_str(), returns.c_str());
      }
    }

    if (kind == SchedulerKind::DPBalance) {
      check.equal_set("dpbalance grants", granted, {"P1", "P3"});
      check.close("dpbalance efficiency", efficiency, 1.0, 0.01);
      check.close("dpbalance pipeline units", plan.pipeline_units, 2.25, 0.01);
      check.close("P1 scale", plan.per_pipeline.at("P1"), 1.0, 1e-6);
      check.close("P3 scale", plan.per_pipeline.at("P3"), 1.25, 1e-3);
      const AnalystOutcome& alice = plan.per_analyst.at("Alice");
      const AnalystOutcome& bob = plan.per_analyst.at("Bob");
      check.close("Alice grant B1", alice.granted.at("B1"), 0.5, 0.01);
      check.close("Alice grant B2", alice.granted.at("B2"), 0.5, 0.01);
      check.close("Bob grant B1", bob.granted.at("B1"), 0.5, 0.01);
      check.close("Bob grant B2", bob.granted.at("B2"), 0.428571428571, 0.01);
      check.close("Alice consumed B2", alice.consumed.at("B2"), 0.3, 0.005);
      check.close("Bob consumed B2", bob.consumed.at("B2"), 0.375, 0.005);
      check.close("Alice return B2", alice.returned.at("B2"), 0.2, 0.005);
      // Exact mechanism value: Bob's grant 3/7 minus consumption 3/8.
      check.close("Bob return B2", bob.returned.at("B2"), 3.0 / 56.0, 0.005);
    } else if (kind == SchedulerKind::DPF || kind == SchedulerKind::DPK) {
      check.equal_set(scheduler_name(kind) + " grants", granted, {"P3", "P4"});
      check.close(scheduler_name(kind) + " efficiency", efficiency, 0.7, 1e-9);
      check.close(scheduler_name(kind) + " leftover B1", leftover["B1"], 0.3, 1e-9);
      check.close(scheduler_name(kind) + " leftover B2", leftover["B2"], 0.4, 1e-9);
    } else {
      check.equal_set("fcfs grants", granted, {"P1", "P2"});
    }
  }

  if (!check.ok) {
    std::printf("demo-fig2: FAILED\n");
    return 1;
  }
  std::printf("demo-fig2: all golden values match\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"privacy-budget scheduling simulator"};
  app.require_subcommand(1);

  std::string config_path, out_path, scheduler, betas_csv = "0.5,2.2,5.0";
  std::string demands_path, regime;
  std::int64_t seed = -1;
  int rounds = 0, instances = 100, jobs = 1;
  double beta = -1.0, lambda = -1.0, rho = 0.0;

  CLI::App* simulate = app.add_subcommand("simulate", "run one simulation, write metric CSV");
  simulate->add_option("--config", config_path, "config JSON")->required();
  simulate->add_option("--scheduler", scheduler, "dpbalance|dpf|dpk|fcfs");
  simulate->add_option("--seed", seed, "PRNG seed override");
  simulate->add_option("--rounds", rounds, "round count override");
  simulate->add_option("--beta", beta, "fairness preference override");
  simulate->add_option("--lambda", lambda, "efficiency preference override");
  simulate->add_option("--out", out_path, "output CSV path")->required();

  CLI::App* sweep = app.add_subcommand("sweep", "run one simulation per beta");
  sweep->add_option("--config", config_path, "config JSON")->required();
  sweep->add_option("--scheduler", scheduler, "dpbalance|dpf|dpk|fcfs");
  sweep->add_option("--betas", betas_csv, "comma-separated betas");
  sweep->add_option("--seed", seed, "PRNG seed override");
  sweep->add_option("--rounds", rounds, "round count override");
  sweep->add_option("--jobs", jobs, "parallel runs");
  sweep->add_option("--out", out_path, "output CSV path")->required();

  CLI::App* solve = app.add_subcommand("solve", "single-round analyst allocation, JSON out");
  solve->add_option("--demands", demands_path, "demand JSON file")->required();
  solve->add_option("--beta", beta, "fairness preference")->required();
  solve->add_option("--lambda", lambda, "efficiency preference");
  solve->add_option("--rho", rho, "waiting decay");
  solve->add_option("--out", out_path, "output path (stdout when omitted)");

  CLI::App* properties = app.add_subcommand("properties", "economic property oracle, JSON out");
  properties
      ->add_option("--regime", regime,
                   "thm1|thm2a|thm2b|thm3a|thm3b|thm3d|thm4a|thm4b|thm6|thm7")
      ->required();
  properties->add_option("--instances", instances, "instances per report");
  properties->add_option("--seed", seed, "PRNG seed");
  properties->add_option("--out", out_path, "output path (stdout when omitted)");

  CLI::App* demo = app.add_subcommand("demo-fig2", "golden worked example on all schedulers");
  (void)demo;

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (simulate->parsed()) {
      return cmd_simulate(config_path, scheduler, seed, rounds, beta, lambda, out_path);
    }
    if (sweep->parsed()) {
      return cmd_sweep(config_path, scheduler, betas_csv, seed, rounds, jobs, out_path);
    }
    if (solve->parsed()) {
      return cmd_solve(demands_path, beta, lambda, rho, out_path);
    }
    if (properties->parsed()) {
      return cmd_properties(regime, instances, seed, out_path);
    }
    if (demo->parsed()) {
      return cmd_demo_fig2();
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
