#include "efr/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "efr/states.hpp"
#include "graph_util.hpp"
#include "rng_util.hpp"

namespace efr {

namespace {

// Local copies of the policy-semantics kernels: the oracle derives rates
// straight from the event dynamics.

// P(willing customer at i is served from k's stock), serve-locally residual
// on the diagonal.
Eigen::MatrixXd serve_probabilities(int n, const QuantilePolicy& pol) {
  Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(n, n);
  if (pol.matching) mu = *pol.matching;
  for (int i = 0; i < n; ++i) {
    mu(i, i) = 0.0;
    mu(i, i) = std::max(0.0, 1.0 - mu.row(i).sum());
  }
  return mu;
}

// P(unit finishing a trip at b settles at c), stay probability on the diagonal.
Eigen::MatrixXd redirect_probabilities(int n, const QuantilePolicy& pol) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(n, n);
  if (!pol.redirect) return p;
  for (int b = 0; b < n; ++b) {
    double total = 0.0;
    for (int c = 0; c < n; ++c) {
      if (c == b) continue;
      p(b, c) = std::max(0.0, (*pol.redirect)(b, c));
      total += p(b, c);
    }
    p(b, b) = std::max(0.0, 1.0 - total);
  }
  return p;
}

using Emit = std::function<void(int, double)>;

// pi Q = 0 with sum pi = 1 by sparse direct solve; reducible chains are
// rejected with the terminal set of states.
StationaryDistribution solve_generator(
    const std::vector<Queue>& queues, const std::vector<std::vector<int>>& states,
    const std::function<void(int, const Emit&)>& transitions) {
  const int count = static_cast<int>(states.size());
  std::vector<std::vector<int>> adjacency(count);
  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd out_rate = Eigen::VectorXd::Zero(count);
  std::vector<std::tuple<int, int, double>> all;  // (from, to, rate) for residuals
  double rate_scale = 0.0;

  for (int s = 0; s < count; ++s) {
    transitions(s, [&](int t, double rate) {
      if (t == s || rate <= 0.0) return;
      adjacency[s].push_back(t);
      all.emplace_back(s, t, rate);
      out_rate[s] += rate;
      rate_scale = std::max(rate_scale, rate);
      if (t != 0) triplets.emplace_back(t, s, rate);
    });
  }

  const auto comp = detail::strongly_connected_components(count, adjacency);
  if (detail::component_count(comp) > 1) {
    throw ReducibleError(std::vector<int>{}, "state chain is reducible (" +
                                 std::to_string(detail::component_count(comp)) +
                                 " communicating classes)");
  }

  for (int s = 1; s < count; ++s) triplets.emplace_back(s, s, -out_rate[s]);
  for (int s = 0; s < count; ++s) triplets.emplace_back(0, s, 1.0);

  Eigen::SparseMatrix<double> system(count, count);
  system.setFromTriplets(triplets.begin(), triplets.end());
  system.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(system);
  if (lu.info() != Eigen::Success) {
    throw ReducibleError(std::vector<int>{}, "generator solve failed (numerically singular chain)");
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(count);
  rhs[0] = 1.0;
  Eigen::VectorXd pi = lu.solve(rhs);
  pi /= pi.sum();

  Eigen::VectorXd residual = -pi.cwiseProduct(out_rate);
  for (const auto& [s, t, rate] : all) residual[t] += pi[s] * rate;
  if (residual.cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, rate_scale) ||
      pi.minCoeff() < -1e-12) {
    throw std::runtime_error("generator stationary solve did not converge");
  }

  StationaryDistribution dist;
  dist.queues = queues;
  dist.states = states;
  dist.probability = pi.cwiseMax(0.0);
  dist.probability /= dist.probability.sum();
  return dist;
}

}  // namespace

StationaryDistribution brute_force_stationary(const Instance& inst, const QuantilePolicy& pol,
                                              long long m, long long cap) {
  const int n = inst.n;
  const CompositeChain chain = composite_chain(inst, pol);  // queue layout only
  const int q_count = static_cast<int>(chain.queues.size());

  std::vector<std::vector<int>> loaded_link(n, std::vector<int>(n, -1));
  std::vector<std::vector<int>> empty_link(n, std::vector<int>(n, -1));
  for (int k = 0; k < q_count; ++k) {
    const Queue& q = chain.queues[k];
    if (q.kind == Queue::Kind::LoadedLink) loaded_link[q.from][q.to] = k;
    if (q.kind == Queue::Kind::EmptyLink) empty_link[q.from][q.to] = k;
  }

  const Eigen::MatrixXd serve = serve_probabilities(n, pol);
  const Eigen::MatrixXd settle = redirect_probabilities(n, pol);

  auto states = enumerate_states(q_count, m, cap);
  StateIndex index(states);

  auto transitions = [&](int s, const Emit& emit) {
    const std::vector<int>& x = states[s];
    std::vector<int> next = x;
    auto move_unit = [&](int from_q, int to_q, double rate) {
      if (from_q == to_q || rate <= 0.0) return;
      next[from_q] -= 1;
      next[to_q] += 1;
      emit(index.at(next), rate);
      next[from_q] += 1;
      next[to_q] -= 1;
    };
    // A unit that just finished a customer trip at node b, leaving queue
    // from_q: settles at b or is redirected.
    auto finish_trip = [&](int from_q, int b, double rate) {
      for (int c = 0; c < n; ++c) {
        const double share = settle(b, c);
        if (share <= 0.0) continue;
        if (c != b && inst.tau(b, c) > 0.0) {
          if (empty_link[b][c] < 0) {
            throw std::logic_error("queue layout misses an empty link with traffic");
          }
          move_unit(from_q, empty_link[b][c], rate * share);
        } else {
          move_unit(from_q, c, rate * share);
        }
      }
    };

    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j || !inst.has_demand(i, j)) continue;
        const double willing = inst.demand(i, j) * pol.q(i, j);
        if (willing <= 0.0) continue;
        for (int k = 0; k < n; ++k) {
          if (serve(i, k) <= 0.0 || x[k] == 0) continue;
          const double rate = willing * serve(i, k);
          if (inst.tau(k, j) > 0.0) {
            if (loaded_link[k][j] < 0) {
              throw std::logic_error("queue layout misses a loaded link with traffic");
            }
            move_unit(k, loaded_link[k][j], rate);
          } else {
            finish_trip(k, j, rate);
          }
        }
      }
    }
    for (int k = 0; k < q_count; ++k) {
      if (x[k] == 0 || chain.queues[k].kind == Queue::Kind::Node) continue;
      const Queue& q = chain.queues[k];
      const double rate = x[k] / inst.tau(q.from, q.to);
      if (q.kind == Queue::Kind::LoadedLink) {
        finish_trip(k, q.to, rate);
      } else {
        move_unit(k, q.to, rate);
      }
    }
  };

  return solve_generator(chain.queues, states, transitions);
}

double state_dependent_objective(const Instance& inst, const StateQuantiles& policy,
                                 long long m) {
  const int n = inst.n;
  auto states = enumerate_states(n, m, 5000);
  if (policy.q.size() != states.size()) {
    throw std::invalid_argument("state policy must assign quantiles to every state");
  }
  StateIndex index(states);
  std::vector<Queue> queues;
  for (int i = 0; i < n; ++i) queues.push_back({Queue::Kind::Node, i, i});

  auto transitions = [&](int s, const Emit& emit) {
    const std::vector<int>& x = states[s];
    std::vector<int> next = x;
    for (int i = 0; i < n; ++i) {
      if (x[i] == 0) continue;
      for (int j = 0; j < n; ++j) {
        if (i == j || !inst.has_demand(i, j)) continue;
        const double rate = inst.demand(i, j) * policy.q[s](i, j);
        if (rate <= 0.0) continue;
        next[i] -= 1;
        next[j] += 1;
        emit(index.at(next), rate);
        next[i] += 1;
        next[j] -= 1;
      }
    }
  };
  StationaryDistribution dist = solve_generator(queues, states, transitions);

  double objective = 0.0;
  for (int s = 0; s < dist.probability.size(); ++s) {
    const std::vector<int>& x = dist.states[s];
    double reward_rate = 0.0;
    for (int i = 0; i < n; ++i) {
      if (x[i] == 0) continue;
      for (int j = 0; j < n; ++j) {
        if (i == j || !inst.has_demand(i, j)) continue;
        const double q = policy.q[s](i, j);
        if (q > 0.0) reward_rate += inst.demand(i, j) * q * inst.per_ride(i, j, q);
      }
    }
    objective += dist.probability[s] * reward_rate;
  }
  return objective;
}

GridSearchResult brute_force_state_dependent_opt(const Instance& inst, long long m,
                                                 const std::vector<double>& grid,
                                                 long long budget) {
  if (grid.empty()) throw std::invalid_argument("grid must be nonempty");
  const int n = inst.n;
  auto states = enumerate_states(n, m, 5000);
  const int state_count = static_cast<int>(states.size());

  // Free dimensions: (state, edge) pairs where the origin holds a unit.
  std::vector<std::pair<int, std::pair<int, int>>> dims;
  for (int s = 0; s < state_count; ++s) {
    for (int i = 0; i < n; ++i) {
      if (states[s][i] == 0) continue;
      for (int j = 0; j < n; ++j) {
        if (i != j && inst.has_demand(i, j)) dims.push_back({s, {i, j}});
      }
    }
  }

  GridSearchResult result;
  result.grid = grid;
  result.best.q.assign(state_count, Eigen::MatrixXd::Zero(n, n));
  result.objective = -1.0;

  auto evaluate = [&](const StateQuantiles& assignment) -> double {
    ++result.evaluations;
    try {
      return state_dependent_objective(inst, assignment, m);
    } catch (const ReducibleError&) {
      return -1.0;  // ill-posed assignment (absorbing states)
    }
  };

  const double combos = std::pow(static_cast<double>(grid.size()), dims.size());
  const bool exhaustive = m == 1 && n <= 3 && grid.size() <= 5 &&
                          combos <= static_cast<double>(budget);
  if (exhaustive) {
    std::vector<size_t> odo(dims.size(), 0);
    StateQuantiles assignment;
    assignment.q.assign(state_count, Eigen::MatrixXd::Zero(n, n));
    while (true) {
      for (size_t d = 0; d < dims.size(); ++d) {
        assignment.q[dims[d].first](dims[d].second.first, dims[d].second.second) = grid[odo[d]];
      }
      const double value = evaluate(assignment);
      if (value > result.objective) {
        result.objective = value;
        result.best = assignment;
      }
      size_t d = 0;
      while (d < dims.size() && ++odo[d] == grid.size()) odo[d++] = 0;
      if (d == dims.size()) break;
    }
    result.certified = true;
    return result;
  }

  // Coordinate ascent from a few deterministic and seeded starts.
  detail::Rng rng(0x5EEDBA5Eu);
  for (int start = 0; start < 4 && result.evaluations < budget; ++start) {
    StateQuantiles current;
    current.q.assign(state_count, Eigen::MatrixXd::Zero(n, n));
    for (const auto& [s, edge] : dims) {
      double q0 = grid.back();
      if (start == 1) q0 = grid[grid.size() / 2];
      if (start >= 2) q0 = grid[rng.uniform_int(0, static_cast<int>(grid.size()) - 1)];
      current.q[s](edge.first, edge.second) = q0;
    }
    double best_here = evaluate(current);
    bool improved = true;
    while (improved && result.evaluations < budget) {
      improved = false;
      for (const auto& [s, edge] : dims) {
        const double saved = current.q[s](edge.first, edge.second);
        for (double level : grid) {
          if (level == saved) continue;
          current.q[s](edge.first, edge.second) = level;
          const double value = evaluate(current);
          if (value > best_here + 1e-12) {
            best_here = value;
            improved = true;
          } else {
            current.q[s](edge.first, edge.second) = saved;
          }
          if (result.evaluations >= budget) break;
        }
        if (result.evaluations >= budget) break;
      }
    }
    if (best_here > result.objective) {
      result.objective = best_here;
      result.best = current;
    }
  }
  result.certified = false;
  return result;
}

BiregularGraph build_biregular_graph(int n, long long m, long long cap) {
  if (m < 1) throw std::invalid_argument("biregular graph needs m >= 1");
  BiregularGraph graph;
  graph.n = n;
  graph.m = m;
  graph.upper_states = enumerate_states(n, m, cap);
  graph.lower_states = enumerate_states(n, m - 1, cap);
  StateIndex lower_index(graph.lower_states);
  graph.upper_sums = Eigen::VectorXd::Zero(static_cast<long>(graph.upper_states.size()));
  graph.lower_sums = Eigen::VectorXd::Zero(static_cast<long>(graph.lower_states.size()));

  for (size_t u = 0; u < graph.upper_states.size(); ++u) {
    std::vector<int> neighbor = graph.upper_states[u];
    for (int i = 0; i < n; ++i) {
      if (neighbor[i] == 0) continue;
      neighbor[i] -= 1;
      const int l = lower_index.at(neighbor);
      neighbor[i] += 1;
      const double weight = static_cast<double>(graph.upper_states[u][i]) / m;
      graph.edges.push_back({static_cast<int>(u), l, weight});
      graph.upper_sums[static_cast<long>(u)] += weight;
      graph.lower_sums[l] += weight;
    }
  }
  return graph;
}

MonotonicityReport check_flow_monotonicity(const Instance& inst, const Eigen::VectorXd& q,
                                           const Eigen::VectorXd& q_prime) {
  if (inst.infinite_units()) throw std::invalid_argument("monotonicity check needs finite m");
  if (q.size() != inst.n || q_prime.size() != inst.n) {
    throw std::invalid_argument("monotonicity check needs per-node point quantiles");
  }
  for (int i = 0; i < inst.n; ++i) {
    if (q_prime[i] < q[i] - 1e-15) {
      throw std::invalid_argument("q' must dominate q componentwise");
    }
  }
  const auto before = steady_state_summary(inst, QuantilePolicy::from_point(q), inst.m);
  const auto after = steady_state_summary(inst, QuantilePolicy::from_point(q_prime), inst.m);
  MonotonicityReport report;
  report.flows_before = before.flows;
  report.flows_after = after.flows;
  report.worst_violation = (before.flows - after.flows).maxCoeff();
  report.ok = report.worst_violation <= 1e-10;
  return report;
}

double poisson_tail_bound(double lambda, double x) {
  if (!(x >= 0.0 && x <= lambda)) {
    throw std::domain_error("poisson tail bound needs 0 <= x <= lambda");
  }
  return std::exp(-x * x / (2.0 * lambda) * (1.0 - x / lambda));
}

double poisson_tail_exact(double lambda, double threshold) {
  // P[X > threshold] = sum of the mass beyond floor(threshold)
  const long long first = static_cast<long long>(std::floor(threshold)) + 1;
  double pmf = std::exp(-lambda);
  double below = 0.0;  // P[X <= threshold]
  for (long long k = 0; k < first; ++k) {
    below += pmf;
    pmf *= lambda / static_cast<double>(k + 1);
  }
  return std::max(0.0, 1.0 - below);
}

namespace {

// Expected return time to `target` for a single unit moving at the given
// effective rates: first-step analysis on the n-state location chain.
double expected_return_time(const Eigen::MatrixXd& effective, int target) {
  const int n = static_cast<int>(effective.rows());
  const Eigen::VectorXd mu = effective.rowwise().sum();
  std::vector<int> others;
  for (int i = 0; i < n; ++i) {
    if (i != target) others.push_back(i);
  }
  const int k = static_cast<int>(others.size());
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(k, k);
  Eigen::VectorXd waits(k);
  for (int a = 0; a < k; ++a) {
    waits[a] = 1.0 / mu[others[a]];
    for (int b = 0; b < k; ++b) {
      system(a, b) -= effective(others[a], others[b]) / mu[others[a]];
    }
  }
  const Eigen::VectorXd h = system.partialPivLu().solve(waits);
  double time = 1.0 / mu[target];
  for (int a = 0; a < k; ++a) {
    time += (effective(target, others[a]) / mu[target]) * h[a];
  }
  return time;
}

}  // namespace

NonconcavityReport nonconcavity_demo(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("need 0 < epsilon < 1");
  NonconcavityReport report;
  report.epsilon = epsilon;

  // Stations A=0, B=1, C=2. Demand: A->B and B->A at rate 1, B->C at rate 1,
  // C->B at rate eps. The three networks differ in the quantile on B->C.
  Instance inst(3, 1);
  inst.objective = RewardKind::Throughput;
  inst.demand(0, 1) = 1.0;
  inst.demand(1, 0) = 1.0;
  inst.demand(1, 2) = 1.0;
  inst.demand(2, 1) = epsilon;
  inst.set_all_dists(ValueDistribution::uniform(0.0, 1.0));

  const std::array<double, 3> q_bc{1.0, (1.0 + epsilon) / 2.0, epsilon};
  report.return_time_formula = {(1.0 + 2.0 * epsilon) / (2.0 * epsilon),
                                (5.0 * epsilon + 1.0) / (epsilon * (3.0 + epsilon)),
                                3.0 / (1.0 + epsilon)};
  for (int network = 0; network < 3; ++network) {
    QuantilePolicy policy = QuantilePolicy::uniform(3, 1.0);
    policy.q(1, 2) = q_bc[network];
    Eigen::MatrixXd effective = Eigen::MatrixXd::Zero(3, 3);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) effective(i, j) = inst.demand(i, j) * policy.q(i, j);
    report.return_time[network] = expected_return_time(effective, 1);
    report.throughput[network] = 2.0 / report.return_time[network];
    report.throughput_product_form[network] = steady_state_summary(inst, policy, 1).obj;
  }
  report.formula_error = 0.0;
  for (int k = 0; k < 3; ++k) {
    report.formula_error = std::max(
        report.formula_error, std::abs(report.return_time[k] - report.return_time_formula[k]));
  }
  report.matches_formulas = report.formula_error <= 1e-9;
  report.midpoint_gap =
      report.throughput[1] < 0.5 * (report.throughput[0] + report.throughput[2]);
  return report;
}

TightnessReport tightness_demo(int n, long long m, double k) {
  if (n < 2 || m < 1 || k < 1.0) throw std::invalid_argument("need n >= 2, m >= 1, k >= 1");
  Instance inst(n, m);
  inst.objective = RewardKind::Throughput;
  for (int i = 0; i + 1 < n; ++i) inst.demand(i, i + 1) = k;
  inst.demand(n - 1, 0) = 1.0;
  inst.set_all_dists(ValueDistribution::uniform(0.0, 1.0));

  TightnessReport report;
  report.n = n;
  report.m = m;
  report.k = k;
  report.guarantee_value = static_cast<double>(n) * m / static_cast<double>(m + n - 1);

  const RelaxSolution sol = solve_efr(inst);
  QuantilePolicy policy;
  policy.q = sol.q;
  report.relaxation_policy_value = steady_state_summary(inst, policy, m).obj;
  report.all_ones_value = steady_state_summary(inst, QuantilePolicy::uniform(n, 1.0), m).obj;
  report.ratio = report.relaxation_policy_value / report.all_ones_value;
  return report;
}

namespace {

// Composite circulation residual of a (q, z) pair under the supply or
// matching balance convention.
double composite_imbalance(const Instance& inst, const Eigen::MatrixXd& q,
                           const Eigen::MatrixXd* z, RelaxVariant variant) {
  double worst = 0.0;
  for (int node = 0; node < inst.n; ++node) {
    double in = 0.0, out = 0.0;
    for (int k = 0; k < inst.n; ++k) {
      if (inst.has_demand(k, node)) in += inst.demand(k, node) * q(k, node);
      if (inst.has_demand(node, k)) out += inst.demand(node, k) * q(node, k);
      if (z) {
        if (variant == RelaxVariant::Matching) {
          // pulls into the node serve its own customers; pulls away serve others
          in += (*z)(node, k);
          out += (*z)(k, node);
        } else {
          in += (*z)(k, node);
          out += (*z)(node, k);
        }
      }
    }
    worst = std::max(worst, std::abs(in - out));
  }
  return worst;
}

}  // namespace

CertificateReport approximation_certificate(const Instance& inst, RelaxVariant variant,
                                            const SolverConfig& config) {
  if (inst.infinite_units() || inst.m < 1) {
    throw std::invalid_argument("certificate needs a finite unit count");
  }
  if (variant != RelaxVariant::Efr && variant != RelaxVariant::SupplyRedirection &&
      variant != RelaxVariant::Matching && variant != RelaxVariant::PointPricing) {
    throw std::invalid_argument("certificate covers efr, supply, matching and point variants");
  }

  CertificateReport report;
  report.variant = variant;
  report.m = inst.m;
  report.n = inst.n;
  report.threshold = static_cast<double>(inst.m) / static_cast<double>(inst.m + inst.n - 1);
  report.approximation_ratio = 1.0 / report.threshold;

  RelaxSolution sol = solve_variant(inst, variant, config);
  report.relaxation_value = sol.value;
  report.relaxation_upper = sol.upper_bound;
  PricePolicy policy = prices_from_relaxation(inst, sol);

  if (variant == RelaxVariant::Efr || variant == RelaxVariant::PointPricing) {
    // A vertex solution may dry out nodes or split the support; bridge it
    // with a negligible connectivity repair before evaluating the chain.
    Eigen::MatrixXd flow = Eigen::MatrixXd::Zero(inst.n, inst.n);
    for (int i = 0; i < inst.n; ++i)
      for (int j = 0; j < inst.n; ++j)
        if (inst.has_demand(i, j)) flow(i, j) = inst.demand(i, j) * policy.quantiles.q(i, j);
    bool dead = false;
    for (int i = 0; i < inst.n && !dead; ++i) dead = flow.row(i).sum() <= 0.0;
    const auto comp = detail::strongly_connected_components(flow);
    if (dead || detail::component_count(comp) > 1) {
      policy.quantiles.q = connectivity_repair(inst, policy.quantiles.q, 1e-6);
      report.repaired = true;
    }
  }

  const SteadyStateSummary summary = steady_state_summary(inst, policy.quantiles, inst.m);
  report.obj_m = summary.obj;
  report.elevated_value = summary.elevated;
  report.ratio = report.obj_m / report.elevated_value;
  report.availability_deviation =
      (summary.availability.array() - report.threshold).abs().maxCoeff();

  if (variant == RelaxVariant::SupplyRedirection || variant == RelaxVariant::Matching) {
    report.demand_circulation =
        composite_imbalance(inst, policy.quantiles.q, sol.z ? &*sol.z : nullptr, variant) <= 1e-8;
  } else {
    report.demand_circulation =
        demand_circulation_check(inst, policy.quantiles.q, 1e-8).balanced;
  }

  report.pass = report.ratio >= report.threshold - 1e-9;
  const double target = report.threshold * report.elevated_value;
  report.equality_pass = report.demand_circulation &&
                         std::abs(report.obj_m - target) <= 1e-8 * std::max(1.0, std::abs(target));
  return report;
}

BicriteriaReport bicriteria_check(const Instance& inst, const SolverConfig& config) {
  if (!inst.multi_objective) throw std::invalid_argument("bicriteria check needs multi_objective");
  if (inst.infinite_units()) throw std::invalid_argument("bicriteria check needs finite m");

  BicriteriaReport report;
  report.gamma = static_cast<double>(inst.m) / static_cast<double>(inst.m + inst.n - 1);
  report.requirement = inst.multi_objective->requirement;

  const RelaxSolution sol = solve_efr_multiobjective(inst, config);
  report.relaxation_value = sol.value;
  report.secondary_relaxed = sol.secondary_value.value_or(0.0);

  QuantilePolicy policy;
  policy.q = sol.q;
  report.phi_m = steady_state_summary(inst, policy, inst.m).obj;
  Instance psi_inst = inst;
  psi_inst.objective = inst.multi_objective->kind;
  report.psi_m = steady_state_summary(psi_inst, policy, inst.m).obj;

  const double tol_primary = 1e-8 * std::max(1.0, report.gamma * report.relaxation_value);
  const double tol_secondary = 1e-8 * std::max(1.0, report.gamma * report.requirement);
  report.primary_pass = report.phi_m >= report.gamma * report.relaxation_value - tol_primary;
  report.secondary_pass = report.psi_m >= report.gamma * report.requirement - tol_secondary;
  return report;
}

DelayBoundReport delay_bound_check(const Instance& inst, const QuantilePolicy& policy,
                                   const SimConfig& sim_config) {
  if (!inst.travel_time) throw std::invalid_argument("delay bound needs travel times");
  DelayBoundReport report;
  report.m = inst.m;
  report.n = inst.n;
  const double m = static_cast<double>(inst.m);
  const double root = std::sqrt(m * std::log(m));
  report.load_limit = m - 2.0 * root;
  for (int i = 0; i < inst.n; ++i)
    for (int j = 0; j < inst.n; ++j)
      if (inst.has_demand(i, j)) report.load += inst.demand(i, j) * inst.tau(i, j) * policy.q(i, j);
  report.applicable = inst.m >= 100 && report.load <= report.load_limit;
  report.bound = (1.0 - 3.0 / std::sqrt(m)) * (root / (root + inst.n - 1));

  report.exact_max_availability =
      steady_state_summary(inst, policy, inst.m).availability.maxCoeff();
  const SimResult sim = simulate(inst, policy, sim_config);
  int arg = 0;
  report.sim_max_availability = sim.availability.maxCoeff(&arg);
  report.sim_halfwidth = sim.availability_halfwidth[arg];
  report.exact_pass = report.exact_max_availability >= report.bound - 1e-12;
  report.sim_pass = report.sim_max_availability >= report.bound - report.sim_halfwidth;
  return report;
}

std::vector<ProductFormCase> product_form_suite() {
  std::vector<ProductFormCase> cases;

  auto two_node = [](double phi12, double phi21) {
    Instance inst(2, 1);
    inst.demand(0, 1) = phi12;
    inst.demand(1, 0) = phi21;
    inst.set_all_dists(ValueDistribution::uniform(0.0, 1.0));
    return inst;
  };
  auto three_cycle = [](double a, double b, double c) {
    Instance inst(3, 1);
    inst.demand(0, 1) = a;
    inst.demand(1, 2) = b;
    inst.demand(2, 0) = c;
    inst.set_all_dists(ValueDistribution::exponential(1.0));
    return inst;
  };
  auto three_dense = []() {
    Instance inst(3, 1);
    inst.demand << 0.0, 1.0, 0.5, 2.0, 0.0, 0.7, 0.3, 1.1, 0.0;
    inst.set_all_dists(ValueDistribution::uniform(0.0, 2.0));
    return inst;
  };
  auto push = [&](std::string name, Instance inst, QuantilePolicy policy, long long m) {
    inst.m = m;
    cases.push_back({std::move(name), std::move(inst), std::move(policy), m});
  };

  // Plain pricing.
  for (long long m = 1; m <= 4; ++m) {
    push("symmetric-2-node-m" + std::to_string(m), two_node(1.0, 1.0),
         QuantilePolicy::uniform(2, 1.0), m);
  }
  for (long long m : {1, 3}) {
    QuantilePolicy mixed = QuantilePolicy::uniform(2, 1.0);
    mixed.q(0, 1) = 0.5;
    push("asymmetric-2-node-m" + std::to_string(m), two_node(2.0, 1.0), mixed, m);
  }
  for (long long m = 1; m <= 3; ++m) {
    push("cycle-3-node-m" + std::to_string(m), three_cycle(1.0, 2.0, 1.5),
         QuantilePolicy::uniform(3, 1.0), m);
  }
  for (long long m = 1; m <= 4; ++m) {
    QuantilePolicy mixed = QuantilePolicy::uniform(3, 0.8);
    mixed.q(0, 1) = 0.35;
    mixed.q(2, 1) = 0.6;
    push("dense-3-node-m" + std::to_string(m), three_dense(), mixed, m);
  }

  // Supply redirection.
  for (long long m = 1; m <= 3; ++m) {
    Instance inst = two_node(1.0, 1.5);
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(2, 2);
    r(0, 1) = 0.3;
    r(1, 0) = 0.45;
    QuantilePolicy policy = QuantilePolicy::uniform(2, 0.9);
    policy.redirect = r;
    push("redirect-2-node-m" + std::to_string(m), std::move(inst), std::move(policy), m);
  }
  for (long long m : {1, 2}) {
    Instance inst = three_dense();
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(3, 3);
    r(0, 2) = 0.25;
    r(1, 0) = 0.2;
    r(1, 2) = 0.3;
    r(2, 1) = 0.5;
    QuantilePolicy policy = QuantilePolicy::uniform(3, 0.75);
    policy.redirect = r;
    push("redirect-3-node-m" + std::to_string(m), std::move(inst), std::move(policy), m);
  }

  // Matching.
  for (long long m = 1; m <= 3; ++m) {
    Instance inst = two_node(1.0, 1.0);
    inst.matching_edges = std::vector<std::pair<int, int>>{{0, 1}};
    Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(2, 2);
    mu(0, 1) = 0.4;
    mu(1, 0) = 0.25;
    QuantilePolicy policy = QuantilePolicy::uniform(2, 1.0);
    policy.matching = mu;
    push("matching-2-node-m" + std::to_string(m), std::move(inst), std::move(policy), m);
  }
  for (long long m : {1, 2}) {
    Instance inst = three_dense();
    inst.matching_edges = std::vector<std::pair<int, int>>{{0, 1}, {1, 2}};
    Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(3, 3);
    mu(0, 1) = 0.35;
    mu(1, 0) = 0.2;
    mu(1, 2) = 0.3;
    mu(2, 1) = 0.15;
    QuantilePolicy policy = QuantilePolicy::uniform(3, 0.85);
    policy.matching = mu;
    push("matching-3-node-m" + std::to_string(m), std::move(inst), std::move(policy), m);
  }

  // Travel times.
  for (long long m = 1; m <= 3; ++m) {
    Instance inst = two_node(1.0, 1.0);
    inst.travel_time = (Eigen::MatrixXd(2, 2) << 0.0, 1.0, 1.0, 0.0).finished();
    push("delay-2-node-m" + std::to_string(m), std::move(inst), QuantilePolicy::uniform(2, 1.0),
         m);
  }
  for (long long m : {1, 2, 3}) {
    Instance inst = three_dense();
    Eigen::MatrixXd tau = Eigen::MatrixXd::Zero(3, 3);
    tau(0, 1) = 0.8;  // leave the rest instantaneous: zero-tau links are elided
    tau(1, 2) = 1.4;
    tau(2, 0) = 0.5;
    inst.travel_time = std::move(tau);
    QuantilePolicy policy = QuantilePolicy::uniform(3, 0.9);
    policy.q(1, 0) = 0.4;
    push("delay-3-node-m" + std::to_string(m), std::move(inst), std::move(policy), m);
  }
  {
    Instance inst = two_node(1.0, 1.0);
    inst.travel_time = (Eigen::MatrixXd(2, 2) << 0.0, 0.0, 0.0, 0.0).finished();
    push("delay-degenerate-2-node", std::move(inst), QuantilePolicy::uniform(2, 1.0), 2);
  }

  // Redirection with travel times (empty transit legs).
  for (long long m : {1, 2}) {
    Instance inst = two_node(1.2, 0.9);
    inst.travel_time = (Eigen::MatrixXd(2, 2) << 0.0, 0.7, 1.1, 0.0).finished();
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(2, 2);
    r(0, 1) = 0.35;
    r(1, 0) = 0.2;
    QuantilePolicy policy = QuantilePolicy::uniform(2, 0.8);
    policy.redirect = r;
    push("redirect-delay-2-node-m" + std::to_string(m), std::move(inst), std::move(policy), m);
  }
  {
    Instance inst = three_cycle(1.0, 1.0, 1.0);
    Eigen::MatrixXd tau = Eigen::MatrixXd::Zero(3, 3);
    tau(0, 1) = 0.5;
    tau(1, 2) = 0.5;
    tau(2, 0) = 0.5;
    tau(1, 0) = 0.9;  // used only by redirected units
    inst.travel_time = std::move(tau);
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(3, 3);
    r(1, 0) = 0.4;
    QuantilePolicy policy = QuantilePolicy::uniform(3, 1.0);
    policy.redirect = r;
    push("redirect-delay-3-node", std::move(inst), std::move(policy), 2);
  }

  // Matching with travel times.
  for (long long m : {1, 2}) {
    Instance inst = two_node(1.0, 1.3);
    inst.matching_edges = std::vector<std::pair<int, int>>{{0, 1}};
    inst.travel_time = (Eigen::MatrixXd(2, 2) << 0.0, 0.6, 0.6, 0.0).finished();
    Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(2, 2);
    mu(0, 1) = 0.3;
    mu(1, 0) = 0.2;
    QuantilePolicy policy = QuantilePolicy::uniform(2, 0.95);
    policy.matching = mu;
    push("matching-delay-2-node-m" + std::to_string(m), std::move(inst), std::move(policy), m);
  }

  // Matching and redirection together.
  {
    Instance inst = three_dense();
    inst.matching_edges = std::vector<std::pair<int, int>>{{0, 2}};
    Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(3, 3);
    mu(0, 2) = 0.3;
    mu(2, 0) = 0.25;
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(3, 3);
    r(1, 2) = 0.35;
    QuantilePolicy policy = QuantilePolicy::uniform(3, 0.9);
    policy.matching = mu;
    policy.redirect = r;
    push("matching-redirect-3-node", std::move(inst), std::move(policy), 2);
  }
  return cases;
}

ProductFormReport check_product_form(const ProductFormCase& pf_case, double tol) {
  ProductFormReport report;
  report.name = pf_case.name;
  const StationaryDistribution analytic =
      pf_case.instance.travel_time
          ? delay_stationary_explicit(pf_case.instance, pf_case.policy, pf_case.m)
          : stationary_distribution_explicit(pf_case.instance, pf_case.policy, pf_case.m);
  const StationaryDistribution brute =
      brute_force_stationary(pf_case.instance, pf_case.policy, pf_case.m);
  if (analytic.probability.size() != brute.probability.size()) {
    throw std::logic_error("state enumerations disagree for " + pf_case.name);
  }
  report.max_abs_error = (analytic.probability - brute.probability).cwiseAbs().maxCoeff();
  report.pass = report.max_abs_error <= tol;
  return report;
}

}  // namespace efr
