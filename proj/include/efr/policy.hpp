#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "efr/model.hpp"
#include "efr/relax.hpp"

namespace efr {

/// Executable prices paired with the quantile policy they came from.
struct PricePolicy {
  Eigen::MatrixXd prices;  // +inf on edges priced out entirely
  QuantilePolicy quantiles;
  RelaxVariant source = RelaxVariant::Efr;
};

/// Turns a relaxation solution into quoted prices plus redirection/matching
/// probabilities: r_ij = z_ij / sum_k phi_ki q_ki for supply redirection,
/// mu_ij = z_ij / sum_k phi_ik q_ik for matching. The no-price rate-limited
/// variant keeps its redirection probabilities and raises all quantiles to
/// one.
PricePolicy prices_from_relaxation(const Instance& instance, const RelaxSolution& solution);

struct DiscreteGridReport {
  Eigen::VectorXd solved_prices;
  Eigen::VectorXd rounded_prices;    // smallest grid price >= solved price
  Eigen::VectorXd solved_quantiles;
  Eigen::VectorXd rounded_quantiles;
  double grid_gap_ratio = 1.0;  // rho = max over consecutive grid quantiles q^s / q^{s+1}
  bool coverage_ok = true;      // every station has a grid quantile <= its solved quantile
  std::vector<int> uncovered_stations;
};

/// Rounds per-station point prices up to the instance's price grid and
/// reports the grid-gap ratio rho >= 1. Stations whose grid has no price at
/// or above the solved price are flagged (and clamped to the top grid price)
/// rather than treated as errors.
DiscreteGridReport round_to_discrete_grid(const Instance& instance,
                                          const Eigen::VectorXd& point_prices);

struct CirculationReport {
  bool balanced = false;
  double worst_imbalance = 0.0;
  int worst_node = -1;
};

/// Per-node |inflow - outflow| of the effective customer rates phi_ij q_ij.
CirculationReport demand_circulation_check(const Instance& instance, const Eigen::MatrixXd& q,
                                           double tol);

/// Merges the strongly connected components of the positive-flow graph
/// {(i,j): phi_ij q_ij > 0} by shifting delta = (eps/k) * min(min positive
/// flow, min positive demand) onto bridging demand edges and off intra-
/// component paths. The output support is strongly connected, every
/// originally positive flow keeps at least (1 - eps) of its value, and the
/// result is still a circulation. Input flows must balance to 1e-9.
Eigen::MatrixXd connectivity_repair(const Instance& instance, const Eigen::MatrixXd& q,
                                    double eps);

}  // namespace efr
