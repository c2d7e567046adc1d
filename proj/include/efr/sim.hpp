#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "efr/model.hpp"

namespace efr {

struct SimConfig {
  std::uint64_t seed = 0;
  double horizon = 1e4;          // simulated time units per replication
  double warmup_fraction = 0.2;  // statistics start at warmup_fraction * horizon
  int replications = 10;
};

/// Empirical steady-state estimates with normal-approximation confidence
/// half-widths across replications (zero when replications == 1).
struct SimResult {
  Eigen::MatrixXd flows;  // realized rides per unit time
  Eigen::MatrixXd flow_halfwidth;
  Eigen::VectorXd availability;  // time fraction with a unit present
  Eigen::VectorXd availability_halfwidth;
  Eigen::MatrixXd redirect_flows;  // redirected units per unit time
  double objective = 0.0;
  double objective_halfwidth = 0.0;
  std::uint64_t events = 0;
};

/// State-dependent quantile q_ij(x); must return 0 when x[origin] == 0 (the
/// simulator additionally never departs an empty node).
using StatePolicy = std::function<double(const std::vector<int>& state, int origin, int dest)>;

/// Event-driven simulation of the continuous-time chain: customer arrivals
/// by thinning the superposed Poisson stream, per-unit exponential transit
/// times, redirection on customer (non-empty) arrivals, matching served
/// locally first and otherwise pulled proportionally from occupied
/// neighbors. Replication r uses the documented derived seed
/// splitmix64(seed + (r+1) * 0x9E3779B97F4A7C15).
SimResult simulate(const Instance& instance, const QuantilePolicy& policy,
                   const SimConfig& config);

/// State-dependent pricing variant (no redirection or matching).
SimResult simulate(const Instance& instance, const StatePolicy& policy, const SimConfig& config);

struct ObjectiveEstimate {
  double value = 0.0;
  double halfwidth = 0.0;
};

/// Recomputes the objective from empirical flows and per-ride rewards,
/// minus redirection costs when applicable.
ObjectiveEstimate estimate_objective(const SimResult& result, const Instance& instance,
                                     const QuantilePolicy& policy);

}  // namespace efr
