#pragma once

#include <vector>

#include <Eigen/Dense>

#include "efr/model.hpp"

namespace efr {

/// Row-stochastic routing probabilities of the node-level chain.
struct RoutingMatrix {
  Eigen::MatrixXd lambda;
};

/// One queue of the composite closed-migration chain. Stations are node
/// queues; units in transit occupy link queues. Customer-carrying transits
/// and empty (redirected) transits are kept in separate link queues so that
/// the routing stays state-independent.
struct Queue {
  enum class Kind { Node, LoadedLink, EmptyLink };
  Kind kind = Kind::Node;
  int from = 0;
  int to = 0;  // == from for node queues
};

struct CompositeChain {
  int n = 0;  // station count
  std::vector<Queue> queues;
  Eigen::MatrixXd routing;   // per-queue routing probabilities, row-stochastic
  Eigen::VectorXd service;   // node: total departure rate; link: 1/tau per unit
  // Node-level rate at which units start moving a->b while node a (or the
  // serving node, under matching) is occupied. Columns of this matrix drive
  // both the routing above and the simulator's event rates.
  Eigen::MatrixXd move;
};

/// Normalization constants G_0..G_m of the product-form stationary
/// distribution, stored pre-scaled: G_k = scaled[k] * scale^k. All downstream
/// uses are ratios, where the scale cancels.
struct NormalizationConstants {
  std::vector<double> scaled;
  double scale = 1.0;

  int size() const { return static_cast<int>(scaled.size()); }
  /// True G_k; throws NormalizationRangeError when it leaves double range.
  double value(int k) const;
  /// G_{k-1} / G_k, scale-free.
  double ratio(int k) const;
};

/// Routing probabilities lambda_ij = (effective movement rate i->j) / (total
/// rate out of i) of the node-level chain, composing redirection and matching
/// probabilities when the policy carries them. A node with zero effective
/// rate makes the chain reducible and raises DeadNodeError.
RoutingMatrix routing_matrix(const Instance& instance, const QuantilePolicy& policy);

/// Invariant row vector w of an irreducible routing matrix: w * lambda = w,
/// sum w = 1, by direct linear solve with a power-iteration fallback
/// (residual <= 1e-12). Reducible input raises ReducibleError naming a node
/// cut with no outgoing transitions.
Eigen::VectorXd invariant_distribution(const RoutingMatrix& routing);
Eigen::VectorXd invariant_distribution(const Eigen::MatrixXd& routing);

/// Traffic intensities r_i = w_i / mu_i with mu_i the effective service rate.
Eigen::VectorXd traffic_intensities(const Instance& instance, const QuantilePolicy& policy,
                                    const Eigen::VectorXd& w);

/// Convolution (Buzen) computation of G_0..G_m for geometric queue weights
/// r_i^x. The input is pre-scaled by 1/max_i r_i to keep the recursion in
/// range; the scale is carried in the result.
NormalizationConstants buzen_normalization(const Eigen::VectorXd& r, long long m);

/// Availabilities A_{i,m} = (G_{m-1}/G_m) * r_i.
Eigen::VectorXd availabilities(const Eigen::VectorXd& r, const NormalizationConstants& G,
                               long long m);

/// Everything the product form yields for a state-independent policy at a
/// given unit count.
struct SteadyStateSummary {
  long long m = 0;  // Instance::kInfiniteUnits for the limit
  Eigen::VectorXd w;   // node-queue invariant vector (composite marginal)
  Eigen::VectorXd mu;  // effective service rates
  Eigen::VectorXd r;   // traffic intensities
  NormalizationConstants G;  // includes link-queue terms when delays present
  double g_ratio = 0.0;      // G_{m-1}/G_m
  Eigen::VectorXd availability;
  Eigen::MatrixXd flows;           // realized customer trip rates f_ij
  Eigen::MatrixXd redirect_flows;  // z_ij of redirected units (zero if unused)
  Eigen::VectorXd node_contribution;  // B_i = sum_j phi_ij q_ij I_ij(q_ij)
  double obj = 0.0;      // objective at this m
  double obj_inf = 0.0;  // same policy in the infinite-unit limit
  double elevated = 0.0; // elevated objective at the policy's own quantiles
};

SteadyStateSummary steady_state_summary(const Instance& instance, const QuantilePolicy& policy,
                                        long long m);

/// Infinite-unit limit: A_{i,inf} = r_i / max_j r_j over node queues, at
/// least one of them 1.
SteadyStateSummary infinite_unit_summary(const Instance& instance, const QuantilePolicy& policy);

/// Elevated objective sum_ij phi_ij R_ij(q_hat_ij), optionally minus the
/// redirection cost sum c_ij z_hat_ij.
double elevated_objective(const Instance& instance, const Eigen::MatrixXd& q_hat);
double elevated_objective(const Instance& instance, const Eigen::MatrixXd& q_hat,
                          const Eigen::MatrixXd& z_hat);

/// Explicit stationary distribution over the colexicographically enumerated
/// state space. `queues` labels the coordinates (node queues only when the
/// instance has no travel times).
struct StationaryDistribution {
  std::vector<Queue> queues;
  std::vector<std::vector<int>> states;
  Eigen::VectorXd probability;
};

StationaryDistribution stationary_distribution_explicit(const Instance& instance,
                                                        const QuantilePolicy& policy, long long m,
                                                        long long cap = 200000);

/// Stationary distribution of the delay (closed-migration) chain over node
/// and link queues: pi(x) prop. to prod_i (w_i/mu_i)^{x_i} * prod_links
/// (tau*w)^{x}/x!. Links with zero transit rate or zero tau are elided.
StationaryDistribution delay_stationary_explicit(const Instance& instance,
                                                 const QuantilePolicy& policy, long long m,
                                                 long long cap = 200000);

/// Composite chain over node queues plus (when travel_time is present) link
/// queues, with redirection/matching folded into the routing.
CompositeChain composite_chain(const Instance& instance, const QuantilePolicy& policy);

/// Node-level effective movement rates move(a,b) and service rates.
/// move(a,b) aggregates customer trips, matching pulls and redirections into
/// the rate at which units leave a for b while a is occupied.
void node_effective_rates(const Instance& instance, const QuantilePolicy& policy,
                          Eigen::MatrixXd& move, Eigen::VectorXd& service);

}  // namespace efr
