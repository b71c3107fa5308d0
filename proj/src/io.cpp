#include "dpbalance/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace dpbalance {

using nlohmann::json;

namespace {

json number(double v) {
  // Serialize through the 12-significant-digit form so files are stable.
  if (!std::isfinite(v)) return nullptr;
  return json::parse(format_number(v));
}

double require_positive(const json& j, const char* field) {
  if (!j.is_number()) throw ConfigError(std::string("field '") + field + "' must be a number");
  const double v = j.get<double>();
  if (!(v > 0.0)) throw ConfigError(std::string("field '") + field + "' must be positive");
  return v;
}

const json& require(const json& j, const char* field) {
  if (!j.contains(field)) throw ConfigError(std::string("missing field '") + field + "'");
  return j.at(field);
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", value);
  return buf;
}

Fixture parse_demand_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("demand file is not valid JSON: ") + e.what());
  }
  Fixture fx;
  for (const json& jb : require(doc, "blocks")) {
    const std::string id = require(jb, "id").get<std::string>();
    const double budget = require_positive(require(jb, "budget"), "budget");
    DeviceProfile device;
    device.device_id = "dev-" + id;
    device.global_budget = budget;
    device.blocks_per_round = 0;
    fx.ledger.add_device(device);
    PrivacyBlock block;
    block.device_id = device.device_id;
    block.block_id = id;
    block.budget_eps = budget;
    if (jb.contains("consumed")) block.consumed_eps = jb.at("consumed").get<double>();
    fx.ledger.add_block(block);
  }
  for (const json& ja : require(doc, "analysts")) {
    const std::string analyst = require(ja, "id").get<std::string>();
    for (const json& jp : require(ja, "pipelines")) {
      PipelineDemand p;
      p.analyst_id = analyst;
      p.pipeline_id = require(jp, "id").get<std::string>();
      p.arrival_round = jp.contains("arrival_round") ? jp.at("arrival_round").get<int>() : 0;
      for (const auto& [block, eps] : require(jp, "demands").items()) {
        p.demands[block] = require_positive(eps, "demands");
      }
      if (p.demands.empty()) {
        throw ConfigError("pipeline " + p.pipeline_id + " has an empty demand map");
      }
      if (jp.contains("losses")) {
        for (const auto& [block, l] : jp.at("losses").items()) {
          const double v = l.get<double>();
          if (!(v > 0.0 && v <= 1.0)) {
            throw ConfigError("loss for block " + block + " must be in (0, 1]");
          }
          p.losses[block] = v;
        }
      } else {
        for (const auto& [block, eps] : p.demands) p.losses[block] = 1.0;
      }
      for (const auto& [block, eps] : p.demands) {
        if (!p.losses.count(block)) {
          throw ConfigError("losses of pipeline " + p.pipeline_id + " miss block " + block);
        }
      }
      fx.pipelines.push_back(std::move(p));
    }
  }
  return fx;
}

Fixture load_demand_file(const std::string& path) {
  return parse_demand_json(read_file(path));
}

std::string demand_to_json(const Fixture& fixture) {
  json doc;
  doc["blocks"] = json::array();
  for (const auto& [id, block] : fixture.ledger.blocks()) {
    json jb;
    jb["id"] = id;
    jb["budget"] = number(block.budget_eps);
    if (block.consumed_eps > 0.0) jb["consumed"] = number(block.consumed_eps);
    doc["blocks"].push_back(jb);
  }
  std::map<AnalystId, std::vector<const PipelineDemand*>> grouped;
  for (const PipelineDemand& p : fixture.pipelines) grouped[p.analyst_id].push_back(&p);
  doc["analysts"] = json::array();
  for (const auto& [analyst, pipelines] : grouped) {
    json ja;
    ja["id"] = analyst;
    ja["pipelines"] = json::array();
    for (const PipelineDemand* p : pipelines) {
      json jp;
      jp["id"] = p->pipeline_id;
      jp["arrival_round"] = p->arrival_round;
      jp["demands"] = json::object();
      for (const auto& [block, eps] : p->demands) jp["demands"][block] = number(eps);
      jp["losses"] = json::object();
      for (const auto& [block, l] : p->losses) jp["losses"][block] = number(l);
      ja["pipelines"].push_back(jp);
    }
    doc["analysts"].push_back(ja);
  }
  return doc.dump(2) + "\n";
}

std::string csv_header() {
  return "round,scheduler,beta,lambda,round_eff,round_fair,cum_eff,cum_fair,"
         "pipelines_allocated,pipeline_units,blocks_retired";
}

std::string csv_row(const RoundMetrics& row, const std::string& scheduler, double beta,
                    double lambda) {
  std::string out;
  out += std::to_string(row.round);
  out += ',';
  out += scheduler;
  out += ',';
  out += format_number(beta);
  out += ',';
  out += format_number(lambda);
  out += ',';
  out += format_number(row.round_efficiency);
  out += ',';
  out += format_number(row.round_fairness);
  out += ',';
  out += format_number(row.cumulative_efficiency);
  out += ',';
  out += format_number(row.cumulative_fairness);
  out += ',';
  out += std::to_string(row.pipelines_allocated);
  out += ',';
  out += format_number(row.pipeline_units);
  out += ',';
  out += std::to_string(row.blocks_retired);
  return out;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<std::pair<double, MetricSeries>>& series_by_beta,
                       const std::string& scheduler, double lambda_used) {
  std::string out = csv_header();
  out += '\n';
  for (const auto& [beta, series] : series_by_beta) {
    const double lambda = lambda_used >= 0.0 ? lambda_used : std::abs(1.0 - beta) / beta;
    for (const RoundMetrics& row : series.rows()) {
      out += csv_row(row, scheduler, beta, lambda);
      out += '\n';
    }
  }
  write_file(path, out);
}

namespace {

json workload_to_json(const WorkloadConfig& w) {
  json j;
  j["device_count"] = w.device_count;
  j["budget_low"] = number(w.budget_low);
  j["budget_high"] = number(w.budget_high);
  j["blocks_per_round"] = w.blocks_per_round;
  j["arrival_rate"] = number(w.arrival_rate);
  j["analysts_per_arrival"] = w.analysts_per_arrival;
  j["pipelines_per_analyst"] = w.pipelines_per_analyst;
  j["mice_fraction"] = number(w.mice_fraction);
  j["mice_eps"] = {number(w.mice_eps_low), number(w.mice_eps_high)};
  j["elephant_eps"] = {number(w.elephant_eps_low), number(w.elephant_eps_high)};
  j["depth_long"] = w.depth_long;
  j["depth_short"] = w.depth_short;
  j["depth_long_prob"] = number(w.depth_long_prob);
  j["full_device_prob"] = number(w.full_device_prob);
  j["partial_device_fraction"] = number(w.partial_device_fraction);
  if (w.loss_range) j["loss_range"] = {number(w.loss_range->first), number(w.loss_range->second)};
  j["rdp_order"] = number(w.rdp_order);
  j["seed"] = w.seed;
  return j;
}

WorkloadConfig workload_from_json(const json& j) {
  WorkloadConfig w;
  w.device_count = require(j, "device_count").get<int>();
  w.budget_low = require(j, "budget_low").get<double>();
  w.budget_high = require(j, "budget_high").get<double>();
  w.blocks_per_round = require(j, "blocks_per_round").get<int>();
  if (j.contains("arrival_rate")) w.arrival_rate = j.at("arrival_rate").get<double>();
  w.analysts_per_arrival = require(j, "analysts_per_arrival").get<int>();
  w.pipelines_per_analyst = require(j, "pipelines_per_analyst").get<int>();
  w.mice_fraction = require(j, "mice_fraction").get<double>();
  const json& mice = require(j, "mice_eps");
  w.mice_eps_low = mice.at(0).get<double>();
  w.mice_eps_high = mice.at(1).get<double>();
  const json& elephant = require(j, "elephant_eps");
  w.elephant_eps_low = elephant.at(0).get<double>();
  w.elephant_eps_high = elephant.at(1).get<double>();
  w.depth_long = require(j, "depth_long").get<int>();
  w.depth_short = require(j, "depth_short").get<int>();
  w.depth_long_prob = require(j, "depth_long_prob").get<double>();
  w.full_device_prob = require(j, "full_device_prob").get<double>();
  w.partial_device_fraction = require(j, "partial_device_fraction").get<double>();
  if (j.contains("loss_range") && !j.at("loss_range").is_null()) {
    w.loss_range = {j.at("loss_range").at(0).get<double>(), j.at("loss_range").at(1).get<double>()};
  }
  if (j.contains("rdp_order")) w.rdp_order = j.at("rdp_order").get<double>();
  if (j.contains("seed")) w.seed = j.at("seed").get<std::uint64_t>();
  w.validate();
  return w;
}

}  // namespace

SimulationSpec parse_config_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  SimulationSpec spec;
  spec.workload = workload_from_json(require(doc, "workload"));
  if (doc.contains("beta")) spec.beta = require_positive(doc.at("beta"), "beta");
  if (doc.contains("lambda") && !doc.at("lambda").is_null()) {
    spec.lambda = doc.at("lambda").get<double>();
    if (spec.lambda < 0.0) throw ConfigError("lambda must be >= 0");
  }
  if (doc.contains("rho")) {
    spec.rho = doc.at("rho").get<double>();
    if (spec.rho < 0.0) throw ConfigError("rho must be >= 0");
  }
  if (doc.contains("scheduler")) {
    spec.scheduler = scheduler_from_name(doc.at("scheduler").get<std::string>());
  }
  if (doc.contains("rounds")) {
    spec.rounds = doc.at("rounds").get<int>();
    if (spec.rounds < 1) throw ConfigError("rounds must be >= 1");
  }
  if (doc.contains("seed")) spec.workload.seed = doc.at("seed").get<std::uint64_t>();
  FairnessParams check(spec.beta, spec.lambda, spec.rho);  // validates the triple
  (void)check;
  return spec;
}

SimulationSpec load_config_file(const std::string& path) {
  return parse_config_json(read_file(path));
}

std::string config_to_json(const SimulationSpec& spec) {
  json doc;
  doc["workload"] = workload_to_json(spec.workload);
  doc["beta"] = number(spec.beta);
  if (spec.lambda >= 0.0) {
    doc["lambda"] = number(spec.lambda);
  } else {
    doc["lambda"] = nullptr;
  }
  doc["rho"] = number(spec.rho);
  doc["scheduler"] = scheduler_name(spec.scheduler);
  doc["rounds"] = spec.rounds;
  doc["seed"] = spec.workload.seed;
  return doc.dump(2) + "\n";
}

std::string snapshot_to_json(const SimulationState& state) {
  json doc;
  doc["clock"] = state.clock;
  doc["config"] = workload_to_json(state.config);
  doc["devices"] = json::array();
  for (const auto& [id, device] : state.ledger.devices()) {
    json jd;
    jd["id"] = id;
    jd["global_budget"] = device.global_budget;
    jd["blocks_per_round"] = device.blocks_per_round;
    doc["devices"].push_back(jd);
  }
  doc["blocks"] = json::array();
  for (const auto& [id, block] : state.ledger.blocks()) {
    json jb;
    jb["id"] = id;
    jb["device"] = block.device_id;
    jb["created_round"] = block.created_round;
    jb["budget"] = block.budget_eps;
    jb["consumed"] = block.consumed_eps;
    doc["blocks"].push_back(jb);
  }
  doc["pending"] = json::array();
  for (const PipelineDemand& p : state.pending) {
    json jp;
    jp["analyst"] = p.analyst_id;
    jp["id"] = p.pipeline_id;
    jp["arrival_round"] = p.arrival_round;
    jp["demands"] = json::object();
    for (const auto& [block, eps] : p.demands) jp["demands"][block] = eps;
    jp["losses"] = json::object();
    for (const auto& [block, l] : p.losses) jp["losses"][block] = l;
    doc["pending"].push_back(jp);
  }
  doc["charged"] = json::object();
  for (const auto& [block, eps] : state.charged) doc["charged"][block] = eps;
  return doc.dump(2) + "\n";
}

SimulationState snapshot_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("snapshot is not valid JSON: ") + e.what());
  }
  SimulationState state;
  state.clock = require(doc, "clock").get<int>();
  state.config = workload_from_json(require(doc, "config"));
  state.ledger = Ledger(state.config.rdp_order);
  for (const json& jd : require(doc, "devices")) {
    DeviceProfile device;
    device.device_id = require(jd, "id").get<std::string>();
    device.global_budget = require(jd, "global_budget").get<double>();
    device.blocks_per_round = require(jd, "blocks_per_round").get<int>();
    state.ledger.add_device(std::move(device));
  }
  // Blocks arrive ordered by id, which matches creation order per device.
  for (const json& jb : require(doc, "blocks")) {
    PrivacyBlock block;
    block.block_id = require(jb, "id").get<std::string>();
    block.device_id = require(jb, "device").get<std::string>();
    block.created_round = require(jb, "created_round").get<int>();
    block.budget_eps = require(jb, "budget").get<double>();
    block.consumed_eps = require(jb, "consumed").get<double>();
    state.ledger.add_block(std::move(block));
  }
  for (const json& jp : require(doc, "pending")) {
    PipelineDemand p;
    p.analyst_id = require(jp, "analyst").get<std::string>();
    p.pipeline_id = require(jp, "id").get<std::string>();
    p.arrival_round = require(jp, "arrival_round").get<int>();
    for (const auto& [block, eps] : require(jp, "demands").items()) {
      p.demands[block] = eps.get<double>();
    }
    for (const auto& [block, l] : require(jp, "losses").items()) {
      p.losses[block] = l.get<double>();
    }
    state.pending.push_back(std::move(p));
  }
  if (doc.contains("charged")) {
    for (const auto& [block, eps] : doc.at("charged").items()) {
      state.charged[block] = eps.get<double>();
    }
  }
  return state;
}

std::string reports_to_json(const std::vector<PropertyReport>& reports) {
  json arr = json::array();
  for (const PropertyReport& report : reports) {
    json jr;
    jr["property"] = report.property;
    jr["beta"] = number(report.beta);
    jr["lambda"] = number(report.lambda);
    jr["instances_tested"] = report.instances_tested;
    jr["verdict"] = report.holds() ? "holds" : "violated";
    jr["violations"] = json::array();
    for (const PropertyViolation& v : report.violations) {
      json jv;
      jv["seed"] = v.seed;
      jv["witness"] = v.witness;
      jv["values"] = json::array();
      for (double value : v.values) jv["values"].push_back(number(value));
      jr["violations"].push_back(jv);
    }
    arr.push_back(jr);
  }
  return arr.dump(2) + "\n";
}

std::string allocation_to_json(const Sub1Result& result) {
  json doc;
  doc["x"] = json::object();
  for (const auto& [analyst, x] : result.x) doc["x"][analyst] = number(x);
  doc["shares"] = json::object();
  for (std::size_t i = 0; i < result.analyst_order.size(); ++i) {
    json row = json::object();
    for (std::size_t k = 0; k < result.block_order.size(); ++k) {
      row[result.block_order[k]] = number(result.allocation.shares[i][k]);
    }
    doc["shares"][result.analyst_order[i]] = row;
  }
  doc["multipliers"] = json::object();
  for (std::size_t k = 0; k < result.block_order.size(); ++k) {
    doc["multipliers"][result.block_order[k]] = number(result.allocation.multipliers[k]);
  }
  doc["objective"] = number(result.allocation.objective);
  doc["kkt"] = number(result.allocation.kkt);
  doc["iterations"] = result.allocation.iterations;
  return doc.dump(2) + "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << content;
  if (!out) throw ConfigError("failed writing file: " + path);
}

}  // namespace dpbalance
