#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "efr/errors.hpp"

namespace efr {

enum class RewardKind { Throughput, Welfare, Revenue };

std::string to_string(RewardKind kind);
RewardKind reward_kind_from_string(const std::string& name);

/// Customer value distribution on an origin-destination pair. Both supported
/// families have a positive density on their support and F(0) < 1, so F is
/// invertible and prices and quantiles are in bijection.
class ValueDistribution {
 public:
  enum class Family { Exponential, Uniform };

  ValueDistribution() = default;  // Uniform(0,1)

  static ValueDistribution exponential(double rate);
  static ValueDistribution uniform(double a, double b);

  Family family() const { return family_; }
  double rate() const { return rate_; }
  double lower() const;  // infimum of the support
  double upper() const;  // supremum of the support; +inf for Exponential
  double uniform_a() const { return a_; }
  double uniform_b() const { return b_; }

  double cdf(double v) const;
  double mean() const;
  double mean_above(double p) const;  // E[V | V >= p]

  bool operator==(const ValueDistribution&) const = default;

 private:
  Family family_ = Family::Uniform;
  double rate_ = 0.0;
  double a_ = 0.0;
  double b_ = 1.0;
};

/// Price quoted for quantile q: F^{-1}(1-q). q = 0 maps to the supremum of
/// the support (+inf for Exponential), q = 1 to the infimum.
double quantile_to_price(const ValueDistribution& dist, double q);

/// Fraction of customers willing to pay p: 1 - F(p). Prices outside the
/// support clamp to {0, 1}.
double price_to_quantile(const ValueDistribution& dist, double p);

/// Reward earned by one realized ride at quantile q: 1 for throughput, the
/// price for revenue, E[V | V >= price] for welfare. q = 0 returns the limit
/// value, which may be +inf.
double per_ride_reward(RewardKind kind, const ValueDistribution& dist, double q);

/// Reward curve R(q) = q * per_ride_reward(q), with R(0) = 0 by continuity.
double reward_curve(RewardKind kind, const ValueDistribution& dist, double q);

/// dR/dq in closed form; defined on the open interval (0,1). For welfare this
/// equals the price at quantile q. At q in {0,1} throws: callers needing the
/// boundary should take one-sided limits themselves.
double reward_curve_derivative(RewardKind kind, const ValueDistribution& dist, double q);

struct ConcavityReport {
  bool concave = false;
  // Maximum second difference of R over the grid; concave when <= +1e-9.
  double worst_second_difference = 0.0;
};

ConcavityReport check_concavity(RewardKind kind, const ValueDistribution& dist, int grid_size);

struct MultiObjective {
  RewardKind kind = RewardKind::Throughput;  // secondary objective Psi
  double requirement = 0.0;                  // Psi-hat >= requirement
};

/// A full problem description: stations, units, demand rates, value
/// distributions, the objective, and the optional control structures
/// (travel times, redirection costs, matching edges, price grids).
struct Instance {
  static constexpr long long kInfiniteUnits = -1;

  int n = 0;
  long long m = 0;  // kInfiniteUnits marks the infinite-unit limit
  Eigen::MatrixXd demand;  // arrival rates phi_ij >= 0, zero diagonal
  RewardKind objective = RewardKind::Throughput;
  std::optional<Eigen::MatrixXd> travel_time;    // mean transit times tau_ij
  std::optional<Eigen::MatrixXd> redirect_cost;  // c_ij
  std::optional<std::vector<std::pair<int, int>>> matching_edges;  // undirected
  std::optional<std::vector<std::vector<double>>> price_grid;  // ascending per station
  std::optional<MultiObjective> multi_objective;

  Instance() = default;
  Instance(int n_, long long m_);

  const ValueDistribution& dist(int i, int j) const;
  void set_dist(int i, int j, const ValueDistribution& d);
  void set_all_dists(const ValueDistribution& d);

  bool has_demand(int i, int j) const { return demand(i, j) > 0.0; }
  bool infinite_units() const { return m == kInfiniteUnits; }
  bool has_matching_edge(int i, int j) const;
  double tau(int i, int j) const;  // 0 when travel_time absent

  double reward(int i, int j, double q) const;
  double per_ride(int i, int j, double q) const;

 private:
  std::vector<ValueDistribution> dists_;  // n*n row-major, defaulted Uniform(0,1)
};

/// State-independent policy. Quantile entries where phi_ij = 0 are stored as
/// written but never read. `redirect` rows may sum to less than one (residual
/// mass keeps the unit in place); `matching` gives the probability that a
/// customer at i is served from the unit stock at j.
struct QuantilePolicy {
  Eigen::MatrixXd q;
  std::optional<Eigen::MatrixXd> redirect;
  std::optional<Eigen::MatrixXd> matching;

  static QuantilePolicy uniform(int n, double value);
  static QuantilePolicy from_point(const Eigen::VectorXd& point_q);
};

/// Checks every Instance invariant (shapes, signs, zero diagonal, strong
/// connectivity of the demand support, distribution parameters, optional
/// field consistency). Returns an empty list when the instance is valid.
std::vector<Diagnostic> validate_instance(const Instance& instance);

/// Throws ValidationError when validate_instance reports anything.
void require_valid(const Instance& instance);

}  // namespace efr
