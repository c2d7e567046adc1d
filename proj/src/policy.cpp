#include "efr/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

#include "graph_util.hpp"

namespace efr {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

PricePolicy prices_from_relaxation(const Instance& inst, const RelaxSolution& sol) {
  const int n = inst.n;
  PricePolicy policy;
  policy.source = sol.variant;
  policy.quantiles.q = Eigen::MatrixXd::Zero(n, n);
  policy.prices = Eigen::MatrixXd::Constant(n, n, kInf);

  const bool all_ones = sol.variant == RelaxVariant::NoPriceRateLimited ||
                        sol.variant == RelaxVariant::NoPrice;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (!inst.has_demand(i, j)) continue;
      const double q = all_ones ? 1.0 : std::clamp(sol.q(i, j), 0.0, 1.0);
      policy.quantiles.q(i, j) = q;
      policy.prices(i, j) = quantile_to_price(inst.dist(i, j), q);
    }
  }

  if (sol.z) {
    if (sol.variant == RelaxVariant::Matching) {
      Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(n, n);
      for (int i = 0; i < n; ++i) {
        double willing = 0.0;
        for (int k = 0; k < n; ++k) {
          if (inst.has_demand(i, k)) willing += inst.demand(i, k) * sol.q(i, k);
        }
        for (int j = 0; j < n; ++j) {
          if (i == j || (*sol.z)(i, j) <= 0.0) continue;
          if (willing <= 1e-12) {
            throw DegenerateError("matching rate at station " + std::to_string(i) +
                                  " divides by a zero willing-customer rate");
          }
          mu(i, j) = (*sol.z)(i, j) / willing;
        }
      }
      policy.quantiles.matching = std::move(mu);
    } else {
      Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, n);
      for (int i = 0; i < n; ++i) {
        double incoming = 0.0;
        for (int k = 0; k < n; ++k) {
          if (inst.has_demand(k, i)) incoming += inst.demand(k, i) * sol.q(k, i);
        }
        for (int j = 0; j < n; ++j) {
          if (i == j || (*sol.z)(i, j) <= 0.0) continue;
          if (incoming <= 1e-12) {
            throw DegenerateError("redirection rate at station " + std::to_string(i) +
                                  " divides by a zero incoming rate");
          }
          r(i, j) = (*sol.z)(i, j) / incoming;
        }
        // The capacity row bounds the total at one; trim accumulated dust.
        const double total = r.row(i).sum();
        if (total > 1.0) {
          if (total > 1.0 + 1e-6) {
            throw DegenerateError("redirection probabilities at station " + std::to_string(i) +
                                  " sum to " + std::to_string(total));
          }
          r.row(i) /= total;
        }
      }
      policy.quantiles.redirect = std::move(r);
    }
  }
  return policy;
}

DiscreteGridReport round_to_discrete_grid(const Instance& inst,
                                          const Eigen::VectorXd& point_prices) {
  if (!inst.price_grid) throw std::invalid_argument("instance has no price grid");
  const int n = inst.n;
  if (point_prices.size() != n) throw std::invalid_argument("need one price per station");

  DiscreteGridReport report;
  report.solved_prices = point_prices;
  report.rounded_prices.resize(n);
  report.solved_quantiles.resize(n);
  report.rounded_quantiles.resize(n);
  report.grid_gap_ratio = 1.0;

  for (int i = 0; i < n; ++i) {
    const auto& grid = (*inst.price_grid)[i];
    if (grid.empty()) {
      throw std::invalid_argument("empty price grid at station " + std::to_string(i));
    }
    // Quantiles of a station's value distribution; point pricing guarantees a
    // single distribution per origin, take the first demand edge's.
    const ValueDistribution* dist = nullptr;
    for (int j = 0; j < n && !dist; ++j) {
      if (inst.has_demand(i, j)) dist = &inst.dist(i, j);
    }
    if (!dist) throw std::invalid_argument("station " + std::to_string(i) + " has no demand");

    report.solved_quantiles[i] = price_to_quantile(*dist, point_prices[i]);
    auto it = std::lower_bound(grid.begin(), grid.end(), point_prices[i] - 1e-12);
    if (it == grid.end()) {
      report.coverage_ok = false;
      report.uncovered_stations.push_back(i);
      --it;  // clamp to the top grid price
    }
    report.rounded_prices[i] = *it;
    report.rounded_quantiles[i] = price_to_quantile(*dist, *it);

    double prev_q = -1.0;
    for (double p : grid) {
      const double q = price_to_quantile(*dist, p);
      if (prev_q >= 0.0 && q > 0.0) {
        report.grid_gap_ratio = std::max(report.grid_gap_ratio, prev_q / q);
      }
      prev_q = q;
    }
  }
  return report;
}

CirculationReport demand_circulation_check(const Instance& inst, const Eigen::MatrixXd& q,
                                           double tol) {
  CirculationReport report;
  report.worst_imbalance = 0.0;
  for (int node = 0; node < inst.n; ++node) {
    double in = 0.0, out = 0.0;
    for (int k = 0; k < inst.n; ++k) {
      if (inst.has_demand(k, node)) in += inst.demand(k, node) * q(k, node);
      if (inst.has_demand(node, k)) out += inst.demand(node, k) * q(node, k);
    }
    const double imbalance = std::abs(in - out);
    if (imbalance > report.worst_imbalance) {
      report.worst_imbalance = imbalance;
      report.worst_node = node;
    }
  }
  report.balanced = report.worst_imbalance <= tol;
  return report;
}

namespace {

// Shortest positive-flow path (hop count, lexicographic tie-break) from
// `from` to `to` within one strongly connected component of the flow graph.
std::vector<int> flow_path(const Eigen::MatrixXd& flow, int from, int to) {
  if (from == to) return {from};
  const int n = static_cast<int>(flow.rows());
  std::vector<int> parent(n, -1);
  std::queue<int> frontier;
  frontier.push(from);
  parent[from] = from;
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    for (int v = 0; v < n; ++v) {
      if (flow(u, v) > 0.0 && parent[v] < 0) {
        parent[v] = u;
        if (v == to) {
          std::vector<int> path{to};
          int cur = to;
          while (cur != from) {
            cur = parent[cur];
            path.push_back(cur);
          }
          std::reverse(path.begin(), path.end());
          return path;
        }
        frontier.push(v);
      }
    }
  }
  throw std::logic_error("no positive-flow path inside a strongly connected component");
}

}  // namespace

Eigen::MatrixXd connectivity_repair(const Instance& inst, const Eigen::MatrixXd& q, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("repair needs 0 < eps < 1");
  const int n = inst.n;

  Eigen::MatrixXd flow = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (inst.has_demand(i, j)) flow(i, j) = inst.demand(i, j) * q(i, j);

  {
    CirculationReport circ = demand_circulation_check(inst, q, 1e-9);
    if (!circ.balanced) {
      std::ostringstream msg;
      msg << "input flow is not a circulation (node " << circ.worst_node << " imbalance "
          << circ.worst_imbalance << ")";
      throw std::invalid_argument(msg.str());
    }
  }

  auto components = detail::strongly_connected_components(flow);
  int k = detail::component_count(components);
  if (k <= 1) {
    Eigen::MatrixXd out = q;
    return out;  // already strongly connected
  }

  double min_flow = kInf, min_phi = kInf;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (flow(i, j) > 0.0) min_flow = std::min(min_flow, flow(i, j));
      if (inst.demand(i, j) > 0.0) min_phi = std::min(min_phi, inst.demand(i, j));
    }
  if (!std::isfinite(min_flow)) min_flow = min_phi;  // all-zero flow: bridge with demand alone
  const double delta = (eps / k) * std::min(min_flow, min_phi);

  for (int guard = 0; guard < n * n; ++guard) {
    components = detail::strongly_connected_components(flow);
    const int comp_count = detail::component_count(components);
    if (comp_count <= 1) break;

    // Component multigraph over demand edges that carry no flow yet; the
    // demand graph is strongly connected, so a component cycle exists.
    // Bridge edge choice is the lexicographically first demand edge per
    // component pair.
    std::vector<std::vector<std::pair<int, int>>> bridge(
        comp_count, std::vector<std::pair<int, int>>(comp_count, {-1, -1}));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (inst.demand(i, j) <= 0.0 || components[i] == components[j]) continue;
        auto& slot = bridge[components[i]][components[j]];
        if (slot.first < 0) slot = {i, j};
      }

    // Shortest component cycle through component 0 by breadth-first search.
    const int start = 0;
    std::vector<int> parent(comp_count, -1);
    std::queue<int> frontier;
    frontier.push(start);
    std::vector<int> cycle;
    while (!frontier.empty() && cycle.empty()) {
      const int c = frontier.front();
      frontier.pop();
      for (int d = 0; d < comp_count; ++d) {
        if (bridge[c][d].first < 0) continue;
        if (d == start) {
          cycle.push_back(start);
          int cur = c;
          while (cur != start) {
            cycle.push_back(cur);
            cur = parent[cur];
          }
          cycle.push_back(start);
          std::reverse(cycle.begin(), cycle.end());
          break;
        }
        if (parent[d] < 0) {
          parent[d] = c;
          frontier.push(d);
        }
      }
    }
    if (cycle.empty()) {
      throw std::logic_error("demand graph claimed strongly connected but no component cycle");
    }

    // cycle = C_1, ..., C_d = C_1. Add delta on each bridge (u_l in C_l ->
    // v_{l+1} in C_{l+1}) and remove delta along the positive-flow path from
    // u_l to v_l inside C_l.
    const size_t segs = cycle.size() - 1;
    std::vector<std::pair<int, int>> bridges(segs);
    for (size_t l = 0; l < segs; ++l) bridges[l] = bridge[cycle[l]][cycle[l + 1]];
    for (size_t l = 0; l < segs; ++l) {
      const int u = bridges[l].first;                       // bridge tail in C_l
      const int v = bridges[(l + segs - 1) % segs].second;  // previous bridge's head, in C_l
      flow(u, bridges[l].second) += delta;
      const auto path = flow_path(flow, u, v);
      for (size_t s = 0; s + 1 < path.size(); ++s) {
        flow(path[s], path[s + 1]) -= delta;
      }
    }
  }

  if (detail::component_count(detail::strongly_connected_components(flow)) > 1) {
    throw std::logic_error("connectivity repair did not converge");
  }

  Eigen::MatrixXd repaired = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (inst.has_demand(i, j)) {
        repaired(i, j) = std::clamp(flow(i, j) / inst.demand(i, j), 0.0, 1.0);
      }
  return repaired;
}

}  // namespace efr
