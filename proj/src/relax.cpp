#include "efr/relax.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "efr/gordon_newell.hpp"

namespace efr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Piecewise-linear machinery.
// ---------------------------------------------------------------------------

// Concave piecewise-linear function on [0,1]: strictly decreasing segment
// slopes between consecutive knots, plus the value at zero.
struct Piecewise {
  std::vector<double> knots;   // 0 = knots[0] < ... < knots.back() = 1
  std::vector<double> slopes;  // one per segment
  double at_zero = 0.0;

  double value(double x) const {
    double v = at_zero;
    for (size_t s = 0; s + 1 < knots.size(); ++s) {
      const double lo = knots[s], hi = knots[s + 1];
      if (x <= lo) break;
      v += slopes[s] * (std::min(x, hi) - lo);
    }
    return v;
  }
  int segments() const { return static_cast<int>(slopes.size()); }
};

struct Line {
  double slope;
  double intercept;
  double at(double x) const { return intercept + slope * x; }
};

// Upper envelope of tangents to weight*R at the given interior points.
Piecewise tangent_envelope(RewardKind kind, const ValueDistribution& dist, double weight,
                           const std::vector<double>& points) {
  std::vector<Line> lines;
  lines.reserve(points.size());
  for (double g : points) {
    const double d = weight * reward_curve_derivative(kind, dist, g);
    const double v = weight * reward_curve(kind, dist, g);
    if (!lines.empty() && std::abs(lines.back().slope - d) <= 1e-13 * (1.0 + std::abs(d))) {
      continue;  // same tangent line (R locally linear)
    }
    lines.push_back({d, v - d * g});
  }

  // Tangent points ascend, so slopes descend; assemble segment boundaries.
  Piecewise env;
  std::vector<double> starts;  // where each kept line becomes active
  std::vector<Line> kept;
  for (const Line& line : lines) {
    double start = 0.0;
    while (!kept.empty()) {
      start = (line.intercept - kept.back().intercept) / (kept.back().slope - line.slope);
      if (start > starts.back() + 1e-15) break;
      kept.pop_back();
      starts.pop_back();
    }
    if (kept.empty()) start = 0.0;
    if (start >= 1.0) continue;
    kept.push_back(line);
    starts.push_back(start);
  }

  env.at_zero = kept.front().at(0.0);
  env.knots.push_back(0.0);
  for (size_t k = 0; k < kept.size(); ++k) {
    const double hi = (k + 1 < kept.size()) ? starts[k + 1] : 1.0;
    if (hi <= env.knots.back()) continue;
    env.knots.push_back(hi);
    env.slopes.push_back(kept[k].slope);
  }
  return env;
}

// Secant interpolant of weight*R through a knot grid: an inner approximation
// (lies below the concave function), exact at the knots.
Piecewise chord_interpolant(RewardKind kind, const ValueDistribution& dist, double weight,
                            int segments) {
  Piecewise pl;
  pl.at_zero = 0.0;
  pl.knots.push_back(0.0);
  double prev_value = 0.0;
  double prev_slope = kInf;
  for (int s = 1; s <= segments; ++s) {
    const double x = static_cast<double>(s) / segments;
    const double v = weight * reward_curve(kind, dist, x);
    const double slope = (v - prev_value) / (x - pl.knots.back());
    if (!pl.slopes.empty() && slope >= prev_slope - 1e-13 * (1.0 + std::abs(slope))) {
      // merge collinear segments
      pl.knots.back() = x;
      const double lo = pl.knots[pl.knots.size() - 2];
      pl.slopes.back() = (v - (pl.value(lo))) / (x - lo);
    } else {
      pl.knots.push_back(x);
      pl.slopes.push_back(slope);
    }
    prev_value = v;
    prev_slope = pl.slopes.back();
  }
  return pl;
}

// ---------------------------------------------------------------------------
// LP assembly for a FlowPolytopeSpec with piecewise-linear reward terms.
// ---------------------------------------------------------------------------

struct Assembled {
  LinearProgram lp;
  std::vector<int> q_offset;    // first objective-delta column per edge
  std::vector<int> psi_offset;  // first secondary-delta column per edge (-1 if none)
  int z_offset = 0;
  double objective_offset = 0.0;  // sum of envelope values at zero
  int value_row = -1;             // optional floor row on the true objective
};

Assembled assemble(const FlowPolytopeSpec& spec, const std::vector<Piecewise>& envelopes,
                   const std::vector<Piecewise>& chords) {
  const int ne = static_cast<int>(spec.q_edges.size());
  const int nz = static_cast<int>(spec.z_edges.size());
  Assembled a;
  a.q_offset.resize(ne);
  a.psi_offset.assign(ne, -1);

  int cols = 0;
  for (int e = 0; e < ne; ++e) {
    a.q_offset[e] = cols;
    cols += envelopes[e].segments();
  }
  if (spec.secondary) {
    for (int e = 0; e < ne; ++e) {
      a.psi_offset[e] = cols;
      cols += chords[e].segments();
    }
  }
  a.z_offset = cols;
  cols += nz;

  LinearProgram& lp = a.lp;
  lp.objective = Eigen::VectorXd::Zero(cols);
  lp.lower = Eigen::VectorXd::Zero(cols);
  lp.upper = Eigen::VectorXd::Constant(cols, kInf);

  for (int e = 0; e < ne; ++e) {
    const Piecewise& env = envelopes[e];
    a.objective_offset += env.at_zero;
    for (int s = 0; s < env.segments(); ++s) {
      lp.objective[a.q_offset[e] + s] = env.slopes[s];
      lp.upper[a.q_offset[e] + s] = env.knots[s + 1] - env.knots[s];
    }
    if (spec.secondary) {
      const Piecewise& pl = chords[e];
      for (int s = 0; s < pl.segments(); ++s) {
        lp.upper[a.psi_offset[e] + s] = pl.knots[s + 1] - pl.knots[s];
      }
    }
  }
  for (int v = 0; v < nz; ++v) {
    lp.objective[a.z_offset + v] = spec.z_cost.size() ? -spec.z_cost[v] : 0.0;
  }

  const int extra = spec.secondary ? ne + 1 : 0;
  lp.rows = Eigen::MatrixXd::Zero(static_cast<int>(spec.rows.size()) + extra, cols);
  lp.rhs = Eigen::VectorXd::Zero(lp.rows.rows());
  lp.sense.assign(static_cast<size_t>(lp.rows.rows()), RowSense::Eq);

  int row = 0;
  for (const auto& r : spec.rows) {
    for (int e = 0; e < ne; ++e) {
      const double c = r.q_coef.size() ? r.q_coef[e] : 0.0;
      if (c == 0.0) continue;
      for (int s = 0; s < envelopes[e].segments(); ++s) lp.rows(row, a.q_offset[e] + s) = c;
    }
    for (int v = 0; v < nz; ++v) {
      const double c = r.z_coef.size() ? r.z_coef[v] : 0.0;
      if (c != 0.0) lp.rows(row, a.z_offset + v) = c;
    }
    lp.rhs[row] = r.rhs;
    lp.sense[row] = r.sense;
    ++row;
  }
  if (spec.secondary) {
    // Tie each edge's secondary deltas to its objective deltas, then require
    // the secant value of the secondary objective to reach the requirement.
    for (int e = 0; e < ne; ++e) {
      for (int s = 0; s < envelopes[e].segments(); ++s) lp.rows(row, a.q_offset[e] + s) = 1.0;
      for (int s = 0; s < chords[e].segments(); ++s) lp.rows(row, a.psi_offset[e] + s) = -1.0;
      lp.rhs[row] = 0.0;
      lp.sense[row] = RowSense::Eq;
      ++row;
    }
    for (int e = 0; e < ne; ++e) {
      for (int s = 0; s < chords[e].segments(); ++s) {
        lp.rows(row, a.psi_offset[e] + s) = chords[e].slopes[s];
      }
    }
    lp.rhs[row] = spec.secondary->requirement;
    lp.sense[row] = RowSense::Ge;
    ++row;
  }
  return a;
}

Eigen::VectorXd edge_values(const Assembled& a, const std::vector<Piecewise>& envelopes,
                            const Eigen::VectorXd& x) {
  Eigen::VectorXd q(a.q_offset.size());
  for (size_t e = 0; e < a.q_offset.size(); ++e) {
    double total = 0.0;
    for (int s = 0; s < envelopes[e].segments(); ++s) total += x[a.q_offset[e] + s];
    q[static_cast<int>(e)] = std::clamp(total, 0.0, 1.0);
  }
  return q;
}

double exact_objective(const FlowPolytopeSpec& spec, const Eigen::VectorXd& q,
                       const Eigen::VectorXd& z) {
  double total = 0.0;
  for (int e = 0; e < q.size(); ++e) {
    if (spec.q_weight[e] != 0.0) {
      total += spec.q_weight[e] * reward_curve(spec.kind, spec.q_dist[e], q[e]);
    }
  }
  for (int v = 0; v < z.size(); ++v) {
    total -= (spec.z_cost.size() ? spec.z_cost[v] : 0.0) * z[v];
  }
  return total;
}

// Inserts a tangent point near x into the edge's point set, halving toward
// the boundary when x sits on it.
bool refine_points(std::vector<double>& pts, double x, int max_points) {
  if (static_cast<int>(pts.size()) >= max_points) return false;
  double candidate = x;
  if (x <= pts.front()) {
    candidate = (x > 0.0) ? x : pts.front() / 2.0;
  } else if (x >= pts.back()) {
    candidate = (x < 1.0) ? x : (pts.back() + 1.0) / 2.0;
  }
  candidate = std::clamp(candidate, 1e-12, 1.0 - 1e-12);
  auto it = std::lower_bound(pts.begin(), pts.end(), candidate);
  if (it != pts.end() && std::abs(*it - candidate) < 1e-12) return false;
  if (it != pts.begin() && std::abs(*(it - 1) - candidate) < 1e-12) return false;
  pts.insert(it, candidate);
  return true;
}

void require_demand_support(const FlowPolytopeSpec& spec) {
  for (size_t e = 0; e < spec.q_edges.size(); ++e) {
    if (spec.q_weight[static_cast<int>(e)] == 0.0) continue;
    const auto report = check_concavity(spec.kind, spec.q_dist[e], 101);
    if (!report.concave) {
      std::ostringstream msg;
      msg << "reward curve on edge (" << spec.q_edges[e].first << "," << spec.q_edges[e].second
          << ") is not concave (worst second difference " << report.worst_second_difference
          << ")";
      throw std::invalid_argument(msg.str());
    }
  }
}

}  // namespace

std::string to_string(RelaxVariant variant) {
  switch (variant) {
    case RelaxVariant::Efr: return "efr";
    case RelaxVariant::SupplyRedirection: return "supply";
    case RelaxVariant::Matching: return "matching";
    case RelaxVariant::MultiObjective: return "multi";
    case RelaxVariant::RateLimited: return "rate-limited";
    case RelaxVariant::PointPricing: return "point";
    case RelaxVariant::NoPrice: return "noprice";
    case RelaxVariant::NoPriceRateLimited: return "noprice-rate-limited";
  }
  throw std::invalid_argument("unknown relaxation variant");
}

RelaxVariant relax_variant_from_string(const std::string& name) {
  for (RelaxVariant v :
       {RelaxVariant::Efr, RelaxVariant::SupplyRedirection, RelaxVariant::Matching,
        RelaxVariant::MultiObjective, RelaxVariant::RateLimited, RelaxVariant::PointPricing,
        RelaxVariant::NoPrice, RelaxVariant::NoPriceRateLimited}) {
    if (to_string(v) == name) return v;
  }
  throw std::invalid_argument("unknown relaxation variant: " + name);
}

RelaxSolution concave_separable_maximize(const FlowPolytopeSpec& spec,
                                         const SolverConfig& config) {
  require_demand_support(spec);
  const int ne = static_cast<int>(spec.q_edges.size());
  const int nz = static_cast<int>(spec.z_edges.size());

  std::vector<std::vector<double>> points(ne);
  for (int e = 0; e < ne; ++e) {
    const int k = std::max(2, config.breakpoints);
    for (int s = 0; s < k; ++s) points[e].push_back((s + 0.5) / k);
  }
  int chord_segments = std::max(2, config.breakpoints);

  RelaxSolution sol;
  sol.variant = RelaxVariant::Efr;
  Eigen::VectorXd q_edge, z_val;
  std::vector<Piecewise> envelopes(ne), chords;
  double upper = 0.0;
  int total_pivots = 0;

  for (int round = 0; round < 400; ++round) {
    for (int e = 0; e < ne; ++e) {
      envelopes[e] = tangent_envelope(spec.kind, spec.q_dist[e], spec.q_weight[e], points[e]);
    }
    chords.clear();
    if (spec.secondary) {
      for (int e = 0; e < ne; ++e) {
        chords.push_back(chord_interpolant(spec.secondary->kind, spec.q_dist[e],
                                           spec.secondary->weight[e], chord_segments));
      }
    }
    Assembled a = assemble(spec, envelopes, chords);
    LpSolution lp = lp_solve(a.lp);
    total_pivots += lp.iterations;

    if (lp.status == LpSolution::Status::Infeasible) {
      if (spec.secondary && chord_segments < config.max_breakpoints) {
        chord_segments = std::min(config.max_breakpoints, chord_segments * 2);
        continue;  // the inner approximation may be too coarse
      }
      throw InfeasibleError(lp.infeasible_rows, "flow polytope is infeasible");
    }
    if (lp.status == LpSolution::Status::Unbounded) {
      throw std::runtime_error("flow relaxation reported unbounded (variables are boxed)");
    }

    upper = lp.value + a.objective_offset;
    q_edge = edge_values(a, envelopes, lp.x);
    z_val = lp.x.segment(a.z_offset, nz);
    const double exact = exact_objective(spec, q_edge, z_val);
    const double gap = upper - exact;
    const double tol = config.gap_tolerance * std::max(1.0, std::abs(upper));

    bool refined = false;
    if (gap > 0.4 * tol) {
      for (int e = 0; e < ne; ++e) {
        if (spec.q_weight[e] == 0.0) continue;
        const double edge_gap = envelopes[e].value(q_edge[e]) -
                                spec.q_weight[e] * reward_curve(spec.kind, spec.q_dist[e], q_edge[e]);
        if (edge_gap > 0.25 * tol / std::max(1, ne)) {
          refined |= refine_points(points[e], q_edge[e], config.max_breakpoints);
        }
      }
    }
    if (gap <= 0.4 * tol || !refined || round == 399) {
      // Tie-break pass: among optimal points prefer the smallest variable
      // sum, holding the piecewise objective within a sliver of its optimum
      // (a tenth of the gap budget, so the certificate still meets the
      // configured tolerance).
      LinearProgram clean = a.lp;
      const double slack = std::min(1e-9 * std::max(1.0, std::abs(lp.value)), 0.1 * tol);
      clean.add_row(a.lp.objective, RowSense::Ge, lp.value - slack);
      clean.objective = Eigen::VectorXd::Zero(clean.num_vars());
      for (int e = 0; e < ne; ++e) {
        for (int s = 0; s < envelopes[e].segments(); ++s) {
          clean.objective[a.q_offset[e] + s] = -1.0;
        }
      }
      for (int v = 0; v < nz; ++v) clean.objective[a.z_offset + v] = -1.0;
      LpSolution tidy = lp_solve(clean);
      total_pivots += tidy.iterations;
      if (tidy.status == LpSolution::Status::Optimal) {
        q_edge = edge_values(a, envelopes, tidy.x);
        z_val = tidy.x.segment(a.z_offset, nz);
      }
      break;
    }
  }

  sol.value = exact_objective(spec, q_edge, z_val);
  sol.upper_bound = upper;
  sol.gap = std::max(0.0, upper - sol.value);
  sol.gap_within_tolerance =
      sol.gap <= config.gap_tolerance * std::max(1.0, std::abs(upper)) + 1e-12;
  sol.iterations = total_pivots;
  for (int e = 0; e < ne; ++e) {
    sol.breakpoints_used = std::max(sol.breakpoints_used, static_cast<int>(points[e].size()));
  }

  // Clip solver dust so downstream supports are clean.
  for (int e = 0; e < q_edge.size(); ++e) {
    if (q_edge[e] < 1e-13) q_edge[e] = 0.0;
    if (q_edge[e] > 1.0 - 1e-13) q_edge[e] = 1.0;
  }
  for (int v = 0; v < z_val.size(); ++v) {
    if (z_val[v] < 1e-13) z_val[v] = 0.0;
  }

  // Repack into matrices via the spec's edge lists.
  int n = spec.n;
  for (const auto& [i, j] : spec.q_edges) n = std::max({n, i + 1, j + 1});
  for (const auto& [i, j] : spec.z_edges) n = std::max({n, i + 1, j + 1});
  sol.q = Eigen::MatrixXd::Zero(n, n);
  for (int e = 0; e < ne; ++e) sol.q(spec.q_edges[e].first, spec.q_edges[e].second) = q_edge[e];
  if (nz > 0) {
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, n);
    for (int v = 0; v < nz; ++v) z(spec.z_edges[v].first, spec.z_edges[v].second) = z_val[v];
    sol.z = std::move(z);
  }
  if (spec.secondary) {
    double psi = 0.0;
    for (int e = 0; e < ne; ++e) {
      psi += spec.secondary->weight[e] *
             reward_curve(spec.secondary->kind, spec.q_dist[e], q_edge[e]);
    }
    sol.secondary_value = psi;
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Variant builders.
// ---------------------------------------------------------------------------

namespace {

std::vector<std::pair<int, int>> support_edges(const Instance& inst) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < inst.n; ++i)
    for (int j = 0; j < inst.n; ++j)
      if (i != j && inst.demand(i, j) > 0.0) edges.emplace_back(i, j);
  return edges;
}

FlowPolytopeSpec base_spec(const Instance& inst) {
  FlowPolytopeSpec spec;
  spec.n = inst.n;
  spec.kind = inst.objective;
  spec.q_edges = support_edges(inst);
  const int ne = static_cast<int>(spec.q_edges.size());
  spec.q_weight.resize(ne);
  spec.q_dist.reserve(ne);
  for (int e = 0; e < ne; ++e) {
    const auto [i, j] = spec.q_edges[e];
    spec.q_weight[e] = inst.demand(i, j);
    spec.q_dist.push_back(inst.dist(i, j));
  }
  return spec;
}

// Supply circulation rows: per node, realized inflow equals realized outflow.
void add_circulation_rows(const Instance& inst, FlowPolytopeSpec& spec) {
  const int ne = static_cast<int>(spec.q_edges.size());
  for (int node = 0; node < inst.n; ++node) {
    FlowPolytopeSpec::Row row;
    row.q_coef = Eigen::VectorXd::Zero(ne);
    for (int e = 0; e < ne; ++e) {
      const auto [i, j] = spec.q_edges[e];
      if (j == node) row.q_coef[e] += inst.demand(i, j);
      if (i == node) row.q_coef[e] -= inst.demand(i, j);
    }
    row.sense = RowSense::Eq;
    row.rhs = 0.0;
    spec.rows.push_back(std::move(row));
  }
}

}  // namespace

RelaxSolution solve_efr(const Instance& inst, const SolverConfig& config) {
  require_valid(inst);
  FlowPolytopeSpec spec = base_spec(inst);
  add_circulation_rows(inst, spec);
  RelaxSolution sol = concave_separable_maximize(spec, config);
  sol.variant = RelaxVariant::Efr;
  return sol;
}

RelaxSolution solve_efr_supply_redirection(const Instance& inst, const SolverConfig& config) {
  require_valid(inst);
  if (!inst.redirect_cost) {
    throw std::invalid_argument("supply redirection needs redirect_cost");
  }
  FlowPolytopeSpec spec = base_spec(inst);
  for (int i = 0; i < inst.n; ++i)
    for (int j = 0; j < inst.n; ++j)
      if (i != j) spec.z_edges.emplace_back(i, j);
  const int ne = static_cast<int>(spec.q_edges.size());
  const int nz = static_cast<int>(spec.z_edges.size());
  spec.z_cost.resize(nz);
  for (int v = 0; v < nz; ++v) {
    spec.z_cost[v] = (*inst.redirect_cost)(spec.z_edges[v].first, spec.z_edges[v].second);
  }
  for (int node = 0; node < inst.n; ++node) {
    FlowPolytopeSpec::Row circ;
    circ.q_coef = Eigen::VectorXd::Zero(ne);
    circ.z_coef = Eigen::VectorXd::Zero(nz);
    FlowPolytopeSpec::Row cap;  // sum_k z_ik <= sum_j phi_ji q_ji
    cap.q_coef = Eigen::VectorXd::Zero(ne);
    cap.z_coef = Eigen::VectorXd::Zero(nz);
    for (int e = 0; e < ne; ++e) {
      const auto [i, j] = spec.q_edges[e];
      if (j == node) circ.q_coef[e] += inst.demand(i, j);
      if (i == node) circ.q_coef[e] -= inst.demand(i, j);
      if (j == node) cap.q_coef[e] -= inst.demand(i, j);
    }
    for (int v = 0; v < nz; ++v) {
      const auto [i, j] = spec.z_edges[v];
      if (j == node) circ.z_coef[v] += 1.0;
      if (i == node) circ.z_coef[v] -= 1.0;
      if (i == node) cap.z_coef[v] += 1.0;
    }
    circ.sense = RowSense::Eq;
    circ.rhs = 0.0;
    cap.sense = RowSense::Le;
    cap.rhs = 0.0;
    spec.rows.push_back(std::move(circ));
    spec.rows.push_back(std::move(cap));
  }
  RelaxSolution sol = concave_separable_maximize(spec, config);
  sol.variant = RelaxVariant::SupplyRedirection;
  return sol;
}

RelaxSolution solve_efr_matching(const Instance& inst, const SolverConfig& config) {
  require_valid(inst);
  if (!inst.matching_edges) {
    throw std::invalid_argument("matching variant needs matching_edges");
  }
  FlowPolytopeSpec spec = base_spec(inst);
  // z_ij: customers at i served from the stock at j, both directions per
  // undirected edge, deduplicated and ordered.
  std::vector<std::pair<int, int>> directed;
  for (const auto& [a, b] : *inst.matching_edges) {
    directed.emplace_back(a, b);
    directed.emplace_back(b, a);
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());
  spec.z_edges = std::move(directed);

  const int ne = static_cast<int>(spec.q_edges.size());
  const int nz = static_cast<int>(spec.z_edges.size());
  spec.z_cost = Eigen::VectorXd::Zero(nz);
  for (int node = 0; node < inst.n; ++node) {
    FlowPolytopeSpec::Row circ;
    circ.q_coef = Eigen::VectorXd::Zero(ne);
    circ.z_coef = Eigen::VectorXd::Zero(nz);
    FlowPolytopeSpec::Row cap;  // sum_k z_ki <= sum_j phi_ji q_ji (pulls from node)
    cap.q_coef = Eigen::VectorXd::Zero(ne);
    cap.z_coef = Eigen::VectorXd::Zero(nz);
    for (int e = 0; e < ne; ++e) {
      const auto [i, j] = spec.q_edges[e];
      if (j == node) circ.q_coef[e] += inst.demand(i, j);
      if (i == node) circ.q_coef[e] -= inst.demand(i, j);
      if (j == node) cap.q_coef[e] -= inst.demand(i, j);
    }
    for (int v = 0; v < nz; ++v) {
      const auto [i, j] = spec.z_edges[v];
      if (i == node) circ.z_coef[v] += 1.0;  // unit pulled to node for its customer
      if (j == node) circ.z_coef[v] -= 1.0;  // unit pulled away from node
      if (j == node) cap.z_coef[v] += 1.0;
    }
    circ.sense = RowSense::Eq;
    circ.rhs = 0.0;
    cap.sense = RowSense::Le;
    cap.rhs = 0.0;
    spec.rows.push_back(std::move(circ));
    spec.rows.push_back(std::move(cap));
  }
  RelaxSolution sol = concave_separable_maximize(spec, config);
  sol.variant = RelaxVariant::Matching;
  return sol;
}

RelaxSolution solve_efr_multiobjective(const Instance& inst, const SolverConfig& config) {
  require_valid(inst);
  if (!inst.multi_objective) {
    throw std::invalid_argument("multi-objective variant needs multi_objective");
  }
  // Rule out genuinely unattainable requirements first, so the refinement
  // loop only ever fights approximation coarseness.
  Instance psi_inst = inst;
  psi_inst.objective = inst.multi_objective->kind;
  psi_inst.multi_objective.reset();
  const RelaxSolution psi_max = solve_efr(psi_inst, config);
  const double c = inst.multi_objective->requirement;
  if (c > psi_max.upper_bound + 1e-9 * std::max(1.0, std::abs(psi_max.upper_bound))) {
    std::ostringstream msg;
    msg << "secondary requirement " << c << " exceeds the maximum achievable "
        << psi_max.upper_bound;
    throw InfeasibleError(std::vector<int>{}, msg.str());
  }

  FlowPolytopeSpec spec = base_spec(inst);
  add_circulation_rows(inst, spec);
  FlowPolytopeSpec::ConcaveConstraint secondary;
  secondary.kind = inst.multi_objective->kind;
  secondary.requirement = c;
  secondary.weight = spec.q_weight;
  spec.secondary = std::move(secondary);
  RelaxSolution sol = concave_separable_maximize(spec, config);
  sol.variant = RelaxVariant::MultiObjective;
  return sol;
}

double epsilon_m(long long m) {
  if (m < 2) throw std::domain_error("epsilon_m needs m >= 2");
  return std::min(1.0, 2.0 * std::sqrt(std::log(static_cast<double>(m)) / m));
}

RelaxSolution solve_efr_rate_limited(const Instance& inst, const SolverConfig& config) {
  require_valid(inst);
  if (!inst.travel_time) throw std::invalid_argument("rate-limited variant needs travel_time");
  if (inst.infinite_units()) throw std::invalid_argument("rate-limited variant needs finite m");
  FlowPolytopeSpec spec = base_spec(inst);
  add_circulation_rows(inst, spec);
  const int ne = static_cast<int>(spec.q_edges.size());
  FlowPolytopeSpec::Row rate;
  rate.q_coef = Eigen::VectorXd::Zero(ne);
  for (int e = 0; e < ne; ++e) {
    const auto [i, j] = spec.q_edges[e];
    rate.q_coef[e] = inst.demand(i, j) * inst.tau(i, j);
  }
  rate.sense = RowSense::Le;
  rate.rhs = static_cast<double>(inst.m);
  spec.rows.push_back(std::move(rate));

  RelaxSolution sol = concave_separable_maximize(spec, config);
  sol.variant = RelaxVariant::RateLimited;
  sol.scaled_q = sol.q * (1.0 - epsilon_m(inst.m));
  return sol;
}

RelaxSolution solve_point_pricing(const Instance& inst, const SolverConfig& config) {
  require_valid(inst);
  for (int i = 0; i < inst.n; ++i) {
    const ValueDistribution* first = nullptr;
    for (int j = 0; j < inst.n; ++j) {
      if (!inst.has_demand(i, j)) continue;
      if (!first) {
        first = &inst.dist(i, j);
      } else if (!(*first == inst.dist(i, j))) {
        throw std::invalid_argument("point pricing needs identical value distributions per origin");
      }
    }
  }

  // Price-independent routing pins the circulation solutions to a single
  // ray q_i = theta * v_i, so the relaxation is one-dimensional.
  const Eigen::VectorXd out_rate = inst.demand.rowwise().sum();
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(inst.n, inst.n);
  for (int i = 0; i < inst.n; ++i) lambda.row(i) = inst.demand.row(i) / out_rate[i];
  const Eigen::VectorXd w = invariant_distribution(lambda);
  Eigen::VectorXd ray = w.cwiseQuotient(out_rate);
  ray /= ray.maxCoeff();  // theta = 1 puts the largest quantile at 1

  auto value_at = [&](double theta) {
    double total = 0.0;
    for (int i = 0; i < inst.n; ++i) {
      const double qi = std::min(1.0, theta * ray[i]);
      for (int j = 0; j < inst.n; ++j) {
        if (inst.has_demand(i, j)) total += inst.demand(i, j) * inst.reward(i, j, qi);
      }
    }
    return total;
  };

  // Golden-section search on [0,1]; the best sampled point and the final
  // bracket certify the optimum of the concave section function.
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0, hi = 1.0;
  double best_x = 1.0, best_f = value_at(1.0);
  int evals = 1;
  if (const double f0 = value_at(0.0); f0 > best_f) {
    best_f = f0;
    best_x = 0.0;
  }
  ++evals;
  double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
  double f1 = value_at(x1), f2 = value_at(x2);
  evals += 2;
  auto note = [&](double x, double f) {
    if (f > best_f) {
      best_f = f;
      best_x = x;
    }
  };
  note(x1, f1);
  note(x2, f2);
  while (hi - lo > 1e-10) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = value_at(x2);
      note(x2, f2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = value_at(x1);
      note(x1, f1);
    }
    ++evals;
  }

  // Concavity bound: slopes only decrease, so the secants through the best
  // point cap the value over the final bracket.
  double upper = best_f;
  if (best_x > lo + 1e-14 && best_x < hi - 1e-14) {
    const double s_left = (best_f - value_at(lo)) / (best_x - lo);
    const double s_right = (value_at(hi) - best_f) / (hi - best_x);
    upper = best_f + std::max({0.0, s_left * (hi - best_x), -s_right * (best_x - lo)});
  }

  RelaxSolution sol;
  sol.variant = RelaxVariant::PointPricing;
  sol.point_q = best_x * ray;
  sol.q = QuantilePolicy::from_point(*sol.point_q).q;
  for (int i = 0; i < inst.n; ++i)
    for (int j = 0; j < inst.n; ++j)
      if (!inst.has_demand(i, j)) sol.q(i, j) = 0.0;
  sol.value = best_f;
  sol.upper_bound = upper;
  sol.gap = std::max(0.0, upper - best_f);
  sol.gap_within_tolerance = sol.gap <= config.gap_tolerance * std::max(1.0, std::abs(upper));
  sol.iterations = evals;
  sol.breakpoints_used = 0;
  return sol;
}

namespace {

// Constant per-ride rewards of the no-price setting: everyone rides at the
// floor price, so the reward is I(1).
double constant_reward(const Instance& inst, int i, int j) {
  return per_ride_reward(inst.objective, inst.dist(i, j), 1.0);
}

RelaxSolution solve_noprice(const Instance& inst, const SolverConfig&, bool rate_limited) {
  require_valid(inst);
  if (!inst.redirect_cost) throw std::invalid_argument("no-price variants need redirect_cost");
  if (rate_limited) {
    if (!inst.travel_time) throw std::invalid_argument("rate-limited variant needs travel_time");
    if (inst.infinite_units()) throw std::invalid_argument("rate-limited variant needs finite m");
  }
  const int n = inst.n;
  std::vector<std::pair<int, int>> z_edges;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) z_edges.emplace_back(i, j);
  const int nz = static_cast<int>(z_edges.size());
  const int cols = n + nz;

  LinearProgram lp;
  lp.objective = Eigen::VectorXd::Zero(cols);
  lp.lower = Eigen::VectorXd::Zero(cols);
  lp.upper = Eigen::VectorXd::Constant(cols, kInf);
  lp.upper.head(n).setOnes();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (inst.has_demand(i, j)) lp.objective[i] += inst.demand(i, j) * constant_reward(inst, i, j);
    }
  }
  for (int v = 0; v < nz; ++v) {
    lp.objective[n + v] = -(*inst.redirect_cost)(z_edges[v].first, z_edges[v].second);
  }

  const int extra_rows = rate_limited ? 1 : 0;
  lp.rows = Eigen::MatrixXd::Zero(2 * n + extra_rows, cols);
  lp.rhs = Eigen::VectorXd::Zero(2 * n + extra_rows);
  lp.sense.assign(static_cast<size_t>(2 * n + extra_rows), RowSense::Eq);
  for (int node = 0; node < n; ++node) {
    // circulation: sum_k (phi_ki q_k + z_ki) = sum_j (phi_node,j q_node + z_node,j)
    for (int k = 0; k < n; ++k) {
      if (inst.has_demand(k, node)) lp.rows(node, k) += inst.demand(k, node);
    }
    lp.rows(node, node) -= inst.demand.row(node).sum();
    // capacity: sum_k z_node,k <= sum_j phi_j,node q_j
    const int cap = n + node;
    lp.sense[cap] = RowSense::Le;
    for (int j = 0; j < n; ++j) {
      if (inst.has_demand(j, node)) lp.rows(cap, j) -= inst.demand(j, node);
    }
    for (int v = 0; v < nz; ++v) {
      const auto [i, j] = z_edges[v];
      if (j == node) lp.rows(node, n + v) += 1.0;
      if (i == node) lp.rows(node, n + v) -= 1.0;
      if (i == node) lp.rows(cap, n + v) += 1.0;
    }
  }
  if (rate_limited) {
    const int row = 2 * n;
    lp.sense[row] = RowSense::Le;
    lp.rhs[row] = static_cast<double>(inst.m);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (inst.has_demand(i, j)) lp.rows(row, i) += inst.demand(i, j) * inst.tau(i, j);
    for (int v = 0; v < nz; ++v) lp.rows(row, n + v) += 1.0;
  }

  LpSolution first = lp_solve(lp);
  if (first.status == LpSolution::Status::Infeasible) {
    throw InfeasibleError(first.infeasible_rows, "no-price polytope is infeasible");
  }
  if (first.status == LpSolution::Status::Unbounded) {
    throw std::runtime_error("no-price program reported unbounded");
  }
  LinearProgram clean = lp;
  clean.add_row(lp.objective, RowSense::Ge,
                first.value - 1e-9 * std::max(1.0, std::abs(first.value)));
  clean.objective = Eigen::VectorXd::Constant(cols, -1.0);
  LpSolution tidy = lp_solve(clean);
  const Eigen::VectorXd x = tidy.status == LpSolution::Status::Optimal ? tidy.x : first.x;

  RelaxSolution sol;
  sol.variant = rate_limited ? RelaxVariant::NoPriceRateLimited : RelaxVariant::NoPrice;
  sol.point_q = x.head(n);
  for (int i = 0; i < n; ++i) {
    if ((*sol.point_q)[i] < 1e-13) (*sol.point_q)[i] = 0.0;
    if ((*sol.point_q)[i] > 1.0 - 1e-13) (*sol.point_q)[i] = 1.0;
  }
  sol.q = QuantilePolicy::from_point(*sol.point_q).q;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (!inst.has_demand(i, j)) sol.q(i, j) = 0.0;
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, n);
  for (int v = 0; v < nz; ++v) {
    z(z_edges[v].first, z_edges[v].second) = x[n + v] < 1e-13 ? 0.0 : x[n + v];
  }
  sol.z = std::move(z);
  sol.value = lp.objective.dot(x);
  sol.upper_bound = first.value;
  sol.gap = std::max(0.0, first.value - sol.value);
  sol.gap_within_tolerance = true;
  sol.iterations = first.iterations + tidy.iterations;
  return sol;
}

}  // namespace

RelaxSolution solve_noprice_redirection(const Instance& inst, const SolverConfig& config) {
  return solve_noprice(inst, config, false);
}

RelaxSolution solve_noprice_rate_limited(const Instance& inst, const SolverConfig& config) {
  return solve_noprice(inst, config, true);
}

RelaxSolution solve_variant(const Instance& inst, RelaxVariant variant,
                            const SolverConfig& config) {
  switch (variant) {
    case RelaxVariant::Efr: return solve_efr(inst, config);
    case RelaxVariant::SupplyRedirection: return solve_efr_supply_redirection(inst, config);
    case RelaxVariant::Matching: return solve_efr_matching(inst, config);
    case RelaxVariant::MultiObjective: return solve_efr_multiobjective(inst, config);
    case RelaxVariant::RateLimited: return solve_efr_rate_limited(inst, config);
    case RelaxVariant::PointPricing: return solve_point_pricing(inst, config);
    case RelaxVariant::NoPrice: return solve_noprice_redirection(inst, config);
    case RelaxVariant::NoPriceRateLimited: return solve_noprice_rate_limited(inst, config);
  }
  throw std::invalid_argument("unknown relaxation variant");
}

}  // namespace efr
