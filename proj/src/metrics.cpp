#include "dpbalance/metrics.hpp"

#include <cmath>
#include <string>

namespace dpbalance {

namespace {

void check_utilities(const std::vector<double>& utilities) {
  for (double u : utilities) {
    if (!(u > 0.0)) {
      throw DegenerateShare("utilities must be strictly positive, got " + std::to_string(u));
    }
  }
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

FairnessParams::FairnessParams(double beta_, double lambda_, double rho_)
    : beta(beta_), lambda(lambda_), rho(rho_) {
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  if (beta == 1.0) throw ConfigError("beta = 1 is rejected (signum singularity)");
  if (lambda < 0.0) lambda = std::abs(1.0 - beta) / beta;
  if (rho < 0.0) throw ConfigError("rho must be >= 0");
}

bool FairnessParams::alpha_fair() const {
  return std::abs(lambda - std::abs(1.0 - beta) / beta) <= 1e-12;
}

void MetricSeries::append(RoundMetrics row) {
  if (rows_.empty()) {
    row.cumulative_efficiency = row.round_efficiency;
    row.cumulative_fairness = row.round_fairness;
  } else {
    row.cumulative_efficiency = rows_.back().cumulative_efficiency + row.round_efficiency;
    row.cumulative_fairness = rows_.back().cumulative_fairness + row.round_fairness;
  }
  rows_.push_back(row);
}

double waiting_coeff(int waiting_rounds, double rho) {
  return std::exp(-rho * static_cast<double>(waiting_rounds));
}

double analyst_efficiency(double mu, double x, double waiting, double loss) {
  return mu * x * waiting * loss;
}

double dominant_efficiency(const std::vector<double>& utilities) {
  double total = 0.0;
  for (double u : utilities) total += u;
  return total;
}

double dominant_fairness(const std::vector<double>& utilities, double beta) {
  check_utilities(utilities);
  if (utilities.empty()) return 0.0;
  const double total = dominant_efficiency(utilities);
  // log-sum-exp over (1-beta) * log(share) keeps large beta finite.
  double max_term = -INFINITY;
  std::vector<double> terms;
  terms.reserve(utilities.size());
  for (double u : utilities) {
    const double t = (1.0 - beta) * std::log(u / total);
    terms.push_back(t);
    max_term = std::max(max_term, t);
  }
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - max_term);
  const double log_sum = max_term + std::log(acc);
  return sign(1.0 - beta) * std::exp(log_sum / beta);
}

double platform_utility(const std::vector<double>& utilities, const FairnessParams& params) {
  const double fairness = dominant_fairness(utilities, params.beta);
  const double total = dominant_efficiency(utilities);
  return fairness * std::pow(total, params.lambda);
}

double alpha_objective(const std::vector<double>& utilities, double beta) {
  check_utilities(utilities);
  double acc = 0.0;
  for (double u : utilities) acc += std::pow(u, 1.0 - beta);
  return acc / (1.0 - beta);
}

}  // namespace dpbalance
