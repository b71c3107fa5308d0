#pragma once

#include <string>
#include <vector>

#include "dpbalance/econ_properties.hpp"
#include "dpbalance/sim_engine.hpp"

namespace dpbalance {

// Number formatting shared by every serializer: 12 significant digits,
// '.' decimal separator.
std::string format_number(double value);

// Demand files: {"blocks":[{"id","budget"}],
//   "analysts":[{"id","pipelines":[{"id","arrival_round",
//                "demands":{block:eps},"losses":{block:l}}]}]}
Fixture parse_demand_json(const std::string& text);
Fixture load_demand_file(const std::string& path);
std::string demand_to_json(const Fixture& fixture);

// Metric CSV. Header is always present; one row per round.
std::string csv_header();
std::string csv_row(const RoundMetrics& row, const std::string& scheduler, double beta,
                    double lambda);
void write_metrics_csv(const std::string& path,
                       const std::vector<std::pair<double, MetricSeries>>& series_by_beta,
                       const std::string& scheduler, double lambda_used);

// Simulation config files.
SimulationSpec parse_config_json(const std::string& text);
SimulationSpec load_config_file(const std::string& path);
std::string config_to_json(const SimulationSpec& spec);

// Snapshot of a running simulation, sufficient for bit-exact replay.
std::string snapshot_to_json(const SimulationState& state);
SimulationState snapshot_from_json(const std::string& text);

// Property reports and solver allocations as JSON.
std::string reports_to_json(const std::vector<PropertyReport>& reports);
std::string allocation_to_json(const Sub1Result& result);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace dpbalance
