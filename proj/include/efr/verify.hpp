#pragma once

#include <array>
#include <string>
#include <vector>

#include "efr/gordon_newell.hpp"
#include "efr/policy.hpp"
#include "efr/relax.hpp"
#include "efr/sim.hpp"

namespace efr {

// ---------------------------------------------------------------------------
// Independent oracles.
// ---------------------------------------------------------------------------

/// Stationary distribution by direct generator solve: per-state event rates
/// are assembled from the trip/redirect/matching/transit dynamics and
/// pi Q = 0 is solved as a sparse linear system. Shares only the queue
/// labeling with the product-form path.
StationaryDistribution brute_force_stationary(const Instance& instance,
                                              const QuantilePolicy& policy, long long m,
                                              long long cap = 5000);

/// State-dependent quantile assignment: one matrix per state of the
/// colexicographic enumeration of S_{n,m}.
struct StateQuantiles {
  std::vector<Eigen::MatrixXd> q;
};

/// Exact long-run reward rate of a state-dependent pricing policy via the
/// generator solve of its (possibly state-dependent) chain.
double state_dependent_objective(const Instance& instance, const StateQuantiles& policy,
                                 long long m);

struct GridSearchResult {
  bool certified = false;  // exhaustive over the grid
  double objective = 0.0;
  StateQuantiles best;
  std::vector<double> grid;
  long long evaluations = 0;
};

/// Best state-dependent grid assignment: exhaustive for m = 1, n <= 3 and at
/// most 5 levels; coordinate ascent from several starts otherwise (labeled
/// uncertified).
GridSearchResult brute_force_state_dependent_opt(const Instance& instance, long long m,
                                                 const std::vector<double>& grid,
                                                 long long budget = 10000000);

// ---------------------------------------------------------------------------
// Constructions and bounds.
// ---------------------------------------------------------------------------

struct BiregularGraph {
  int n = 0;
  long long m = 0;
  std::vector<std::vector<int>> upper_states;  // S_{n,m}
  std::vector<std::vector<int>> lower_states;  // S_{n,m-1}
  struct Edge {
    int upper;
    int lower;
    double weight;  // x_i / m
  };
  std::vector<Edge> edges;
  Eigen::VectorXd upper_sums;  // 1 per upper state
  Eigen::VectorXd lower_sums;  // (m+n-1)/m per lower state
};

/// Weighted biregular graph between S_{n,m} and S_{n,m-1}: edge (x, x - e_i)
/// with weight x_i/m for every x_i > 0.
BiregularGraph build_biregular_graph(int n, long long m, long long cap = 200000);

struct MonotonicityReport {
  bool ok = false;
  double worst_violation = 0.0;  // max over edges of f(q) - f(q')
  Eigen::MatrixXd flows_before, flows_after;
};

/// Exact check that realized flows are componentwise non-decreasing when
/// point quantiles increase componentwise.
MonotonicityReport check_flow_monotonicity(const Instance& instance, const Eigen::VectorXd& q,
                                           const Eigen::VectorXd& q_prime);

/// Chernoff bound exp(-x^2/(2 lambda) (1 - x/lambda)) on P[X > lambda + x]
/// for X ~ Poisson(lambda), 0 <= x <= lambda.
double poisson_tail_bound(double lambda, double x);

/// Exact P[X > threshold] by probability mass summation.
double poisson_tail_exact(double lambda, double threshold);

// ---------------------------------------------------------------------------
// Demonstrations.
// ---------------------------------------------------------------------------

/// Three-node single-unit networks whose throughput is non-concave in the
/// effective demand rates: expected return times to the hub are computed by
/// first-passage analysis and checked against the closed forms
/// (1+2e)/(2e), (5e+1)/(e(3+e)), 3/(1+e); throughput = 2 / return time.
struct NonconcavityReport {
  double epsilon = 0.0;
  std::array<double, 3> return_time{};          // first-passage computation
  std::array<double, 3> return_time_formula{};  // closed forms
  std::array<double, 3> throughput{};
  std::array<double, 3> throughput_product_form{};  // steady-state cross-check
  double formula_error = 0.0;  // max |computed - formula|
  bool matches_formulas = false;
  bool midpoint_gap = false;  // throughput(II) < (I + III) / 2
};

NonconcavityReport nonconcavity_demo(double epsilon);

/// Cycle instance phi_{i,i+1} = k, phi_{n,1} = 1: the relaxation policy is
/// worth exactly nm/(m+n-1) while all-quantiles-one approaches n as k grows.
struct TightnessReport {
  int n = 0;
  long long m = 0;
  double k = 0.0;
  double relaxation_policy_value = 0.0;
  double guarantee_value = 0.0;  // nm/(m+n-1)
  double all_ones_value = 0.0;
  double ratio = 0.0;  // relaxation policy value / all-ones value
};

TightnessReport tightness_demo(int n, long long m, double k);

// ---------------------------------------------------------------------------
// Certificates.
// ---------------------------------------------------------------------------

struct CertificateReport {
  RelaxVariant variant = RelaxVariant::Efr;
  long long m = 0;
  int n = 0;
  double relaxation_value = 0.0;  // exact objective of the relaxation point
  double relaxation_upper = 0.0;  // certified upper bound on the relaxation
  double elevated_value = 0.0;    // elevated objective of the executed policy
  double obj_m = 0.0;
  double ratio = 0.0;      // obj_m / elevated_value
  double threshold = 0.0;  // m/(m+n-1)
  double approximation_ratio = 0.0;  // (m+n-1)/m
  double availability_deviation = 0.0;  // max_i |A_i - threshold|
  bool demand_circulation = false;
  bool repaired = false;  // connectivity repair applied to the output
  bool pass = false;      // ratio >= threshold - 1e-9
  bool equality_pass = false;  // circulation: obj_m = threshold * elevated (1e-8 rel)
};

/// Solves the given relaxation variant, converts it to an executable policy,
/// evaluates the exact m-unit objective, and checks the approximation
/// guarantee. A disconnected pricing output is first run through
/// connectivity_repair with a negligible epsilon.
CertificateReport approximation_certificate(const Instance& instance, RelaxVariant variant,
                                            const SolverConfig& config = {});

struct BicriteriaReport {
  double gamma = 0.0;
  double requirement = 0.0;
  double relaxation_value = 0.0;  // Phi-hat at the returned point
  double secondary_relaxed = 0.0; // Psi-hat at the returned point
  double phi_m = 0.0;
  double psi_m = 0.0;
  bool primary_pass = false;    // Phi_m >= gamma * relaxation_value - tol
  bool secondary_pass = false;  // Psi_m >= gamma * requirement - tol
};

BicriteriaReport bicriteria_check(const Instance& instance, const SolverConfig& config = {});

struct DelayBoundReport {
  long long m = 0;
  int n = 0;
  double load = 0.0;        // sum phi tau q
  double load_limit = 0.0;  // m - 2 sqrt(m ln m)
  double bound = 0.0;       // (1 - 3/sqrt(m)) sqrt(m ln m)/(sqrt(m ln m)+n-1)
  double exact_max_availability = 0.0;
  double sim_max_availability = 0.0;
  double sim_halfwidth = 0.0;
  bool applicable = false;  // m >= 100 and load within the limit
  bool exact_pass = false;
  bool sim_pass = false;
};

/// Availability lower bound under travel times, checked both exactly (via
/// the product form) and by simulation.
DelayBoundReport delay_bound_check(const Instance& instance, const QuantilePolicy& policy,
                                   const SimConfig& sim_config);

// ---------------------------------------------------------------------------
// Shipped product-form verification suite.
// ---------------------------------------------------------------------------

struct ProductFormCase {
  std::string name;
  Instance instance;
  QuantilePolicy policy;
  long long m = 0;
};

/// Small instances covering pricing, redirection, matching, delays and their
/// combinations (>= 30 cases).
std::vector<ProductFormCase> product_form_suite();

struct ProductFormReport {
  std::string name;
  double max_abs_error = 0.0;
  bool pass = false;
};

/// Product-form stationary distribution vs. the generator solve, per state.
ProductFormReport check_product_form(const ProductFormCase& pf_case, double tol = 1e-9);

}  // namespace efr
