#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "efr/model.hpp"

namespace efr {

// ---------------------------------------------------------------------------
// Linear programming core: dense two-phase simplex with simple bounds and
// Bland's rule, deterministic for a fixed input ordering.
// ---------------------------------------------------------------------------

enum class RowSense : char { Le = 'L', Eq = 'E', Ge = 'G' };

struct LinearProgram {
  Eigen::VectorXd objective;  // maximized
  Eigen::VectorXd lower;      // currently must be zero
  Eigen::VectorXd upper;      // +inf allowed
  Eigen::MatrixXd rows;
  Eigen::VectorXd rhs;
  std::vector<RowSense> sense;

  int num_vars() const { return static_cast<int>(objective.size()); }
  int num_rows() const { return static_cast<int>(rhs.size()); }
  void add_row(const Eigen::VectorXd& coef, RowSense s, double b);
};

struct LpSolution {
  enum class Status { Optimal, Infeasible, Unbounded };
  Status status = Status::Infeasible;
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  std::vector<int> infeasible_rows;  // rows left violated at phase-1 end
};

/// Optimal basic solution of a bounded feasible LP. Unbounded problems cannot
/// occur for the flow polytopes here since all variables are box-bounded, but
/// the status is reported for completeness.
LpSolution lp_solve(const LinearProgram& lp);

// ---------------------------------------------------------------------------
// Separable concave maximization over a flow polytope.
// ---------------------------------------------------------------------------

struct SolverConfig {
  int breakpoints = 64;         // initial tangent points per edge
  int max_breakpoints = 1024;   // hard cap per edge during refinement
  double gap_tolerance = 1e-6;  // relative certified gap target
  double feasibility_tolerance = 1e-8;
};

enum class RelaxVariant {
  Efr,
  SupplyRedirection,
  Matching,
  MultiObjective,
  RateLimited,
  PointPricing,
  NoPrice,
  NoPriceRateLimited,
};

std::string to_string(RelaxVariant variant);
RelaxVariant relax_variant_from_string(const std::string& name);

struct RelaxSolution {
  RelaxVariant variant = RelaxVariant::Efr;
  Eigen::MatrixXd q;                        // relaxed quantiles
  std::optional<Eigen::MatrixXd> z;         // redirection / matching rates
  std::optional<Eigen::VectorXd> point_q;   // per-node quantiles
  std::optional<Eigen::MatrixXd> scaled_q;  // rate-limited: q * (1 - eps_m)
  double value = 0.0;        // exact concave objective at the returned point
  double upper_bound = 0.0;  // piecewise-linear relaxation optimum
  double gap = 0.0;          // upper_bound - value, >= 0
  bool gap_within_tolerance = true;
  std::optional<double> secondary_value;  // multi-objective: Psi-hat at the point
  int iterations = 0;        // total simplex pivots
  int breakpoints_used = 0;  // largest tangent set on any edge
};

/// A flow polytope with a separable concave objective: one reward term per
/// q-edge (weight * R(q)), linear costs on z-edges, linear rows over both
/// variable groups, and an optional concave side constraint.
struct FlowPolytopeSpec {
  struct Row {
    Eigen::VectorXd q_coef;
    Eigen::VectorXd z_coef;
    RowSense sense = RowSense::Eq;
    double rhs = 0.0;
  };
  struct ConcaveConstraint {
    RewardKind kind = RewardKind::Throughput;
    Eigen::VectorXd weight;  // per q-edge
    double requirement = 0.0;
  };

  int n = 0;  // station count, for repacking solutions into matrices
  std::vector<std::pair<int, int>> q_edges;
  std::vector<std::pair<int, int>> z_edges;
  std::vector<Row> rows;

  RewardKind kind = RewardKind::Throughput;
  std::vector<ValueDistribution> q_dist;  // per q-edge
  Eigen::VectorXd q_weight;               // per q-edge; 0 drops the reward term
  Eigen::VectorXd z_cost;                 // objective -= z_cost . z
  std::optional<ConcaveConstraint> secondary;
};

/// Maximizes the spec's objective by outer (tangent) piecewise-linear
/// approximation of each reward term, refining tangent points at the solution
/// until the certified gap meets the tolerance. The secondary constraint uses
/// inner (secant) cuts so returned points are genuinely feasible for it.
RelaxSolution concave_separable_maximize(const FlowPolytopeSpec& spec, const SolverConfig& config);

// ---------------------------------------------------------------------------
// Relaxation variants.
// ---------------------------------------------------------------------------

/// max sum phi_ij R_ij(q_ij) over supply circulation and the box; the output
/// satisfies demand circulation by construction.
RelaxSolution solve_efr(const Instance& instance, const SolverConfig& config = {});

/// Adds redirection rates z_ij with costs c_ij.
RelaxSolution solve_efr_supply_redirection(const Instance& instance,
                                           const SolverConfig& config = {});

/// Adds matching pulls z_ij supported on the matching edge set, cost-free.
RelaxSolution solve_efr_matching(const Instance& instance, const SolverConfig& config = {});

/// Maximizes the primary objective subject to the elevated secondary
/// objective meeting the instance's requirement.
RelaxSolution solve_efr_multiobjective(const Instance& instance, const SolverConfig& config = {});

/// Adds sum phi_ij tau_ij q_ij <= m and returns both the relaxation solution
/// and the quantiles scaled by (1 - eps_m).
RelaxSolution solve_efr_rate_limited(const Instance& instance, const SolverConfig& config = {});

/// Scaling parameter 2 sqrt(ln m / m), clamped to <= 1; requires m >= 2.
double epsilon_m(long long m);

/// Point pricing: per-origin distributions, one quantile per node. The
/// circulation constraint pins the solution to a single ray, so the problem
/// reduces to a one-dimensional concave maximization solved by golden-section
/// search (bracket width 1e-10).
RelaxSolution solve_point_pricing(const Instance& instance, const SolverConfig& config = {});

/// Redirection without prices (constant per-ride rewards, pure LP).
RelaxSolution solve_noprice_redirection(const Instance& instance, const SolverConfig& config = {});

/// Rate-limited redirection without prices; the returned redirection
/// probabilities are meant to be used with all quantiles raised to one.
RelaxSolution solve_noprice_rate_limited(const Instance& instance,
                                         const SolverConfig& config = {});

RelaxSolution solve_variant(const Instance& instance, RelaxVariant variant,
                            const SolverConfig& config = {});

}  // namespace efr
