#include "efr/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace efr {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_quantile(double q) {
  if (!(q >= 0.0 && q <= 1.0)) {
    throw std::domain_error("quantile must lie in [0,1], got " + std::to_string(q));
  }
}
}  // namespace

std::string format_diagnostics(const std::vector<Diagnostic>& diags) {
  std::ostringstream out;
  out << diags.size() << " diagnostic(s):";
  for (const auto& d : diags) out << "\n  " << d.path << ": " << d.message;
  return out.str();
}

std::string to_string(RewardKind kind) {
  switch (kind) {
    case RewardKind::Throughput: return "throughput";
    case RewardKind::Welfare: return "welfare";
    case RewardKind::Revenue: return "revenue";
  }
  throw std::invalid_argument("unknown reward kind");
}

RewardKind reward_kind_from_string(const std::string& name) {
  if (name == "throughput") return RewardKind::Throughput;
  if (name == "welfare") return RewardKind::Welfare;
  if (name == "revenue") return RewardKind::Revenue;
  throw std::invalid_argument("unknown reward kind: " + name);
}

ValueDistribution ValueDistribution::exponential(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw std::invalid_argument("Exponential rate must be positive and finite");
  }
  ValueDistribution d;
  d.family_ = Family::Exponential;
  d.rate_ = rate;
  return d;
}

ValueDistribution ValueDistribution::uniform(double a, double b) {
  if (!(a >= 0.0 && a < b) || !std::isfinite(a) || !std::isfinite(b)) {
    throw std::invalid_argument("Uniform support requires 0 <= a < b");
  }
  ValueDistribution d;
  d.family_ = Family::Uniform;
  d.a_ = a;
  d.b_ = b;
  return d;
}

double ValueDistribution::lower() const {
  return family_ == Family::Exponential ? 0.0 : a_;
}

double ValueDistribution::upper() const {
  return family_ == Family::Exponential ? kInf : b_;
}

double ValueDistribution::cdf(double v) const {
  switch (family_) {
    case Family::Exponential:
      return v <= 0.0 ? 0.0 : 1.0 - std::exp(-rate_ * v);
    case Family::Uniform:
      if (v <= a_) return 0.0;
      if (v >= b_) return 1.0;
      return (v - a_) / (b_ - a_);
  }
  throw std::logic_error("unreachable");
}

double ValueDistribution::mean() const {
  return family_ == Family::Exponential ? 1.0 / rate_ : 0.5 * (a_ + b_);
}

double ValueDistribution::mean_above(double p) const {
  switch (family_) {
    case Family::Exponential:
      // memoryless: E[V | V >= p] = max(p,0) + 1/rate
      return std::max(p, 0.0) + 1.0 / rate_;
    case Family::Uniform: {
      const double lo = std::clamp(p, a_, b_);
      return 0.5 * (lo + b_);
    }
  }
  throw std::logic_error("unreachable");
}

double quantile_to_price(const ValueDistribution& dist, double q) {
  require_quantile(q);
  switch (dist.family()) {
    case ValueDistribution::Family::Exponential:
      if (q == 0.0) return kInf;
      return -std::log(q) / dist.rate();
    case ValueDistribution::Family::Uniform:
      return dist.uniform_b() - (dist.uniform_b() - dist.uniform_a()) * q;
  }
  throw std::logic_error("unreachable");
}

double price_to_quantile(const ValueDistribution& dist, double p) {
  if (std::isnan(p)) throw std::domain_error("price must not be NaN");
  switch (dist.family()) {
    case ValueDistribution::Family::Exponential:
      if (p <= 0.0) return 1.0;
      return std::exp(-dist.rate() * p);
    case ValueDistribution::Family::Uniform: {
      if (p <= dist.uniform_a()) return 1.0;
      if (p >= dist.uniform_b()) return 0.0;
      return 1.0 - (p - dist.uniform_a()) / (dist.uniform_b() - dist.uniform_a());
    }
  }
  throw std::logic_error("unreachable");
}

double per_ride_reward(RewardKind kind, const ValueDistribution& dist, double q) {
  require_quantile(q);
  switch (kind) {
    case RewardKind::Throughput:
      return 1.0;
    case RewardKind::Revenue:
      return quantile_to_price(dist, q);
    case RewardKind::Welfare:
      return dist.mean_above(quantile_to_price(dist, q));
  }
  throw std::invalid_argument("unsupported reward kind");
}

double reward_curve(RewardKind kind, const ValueDistribution& dist, double q) {
  require_quantile(q);
  if (q == 0.0) return 0.0;  // q * I(q) -> 0 even when I(0) = +inf
  return q * per_ride_reward(kind, dist, q);
}

double reward_curve_derivative(RewardKind kind, const ValueDistribution& dist, double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw std::domain_error(
        "reward_curve_derivative is defined on (0,1); take one-sided limits at the boundary");
  }
  switch (kind) {
    case RewardKind::Throughput:
      return 1.0;
    case RewardKind::Welfare:
      // dR/dq = p(q) for any value distribution
      return quantile_to_price(dist, q);
    case RewardKind::Revenue:
      switch (dist.family()) {
        case ValueDistribution::Family::Uniform:
          // R(q) = q(b - (b-a)q)
          return dist.uniform_b() - 2.0 * (dist.uniform_b() - dist.uniform_a()) * q;
        case ValueDistribution::Family::Exponential:
          // R(q) = -q ln(q) / rate
          return -(std::log(q) + 1.0) / dist.rate();
      }
  }
  throw std::invalid_argument("unsupported reward kind");
}

ConcavityReport check_concavity(RewardKind kind, const ValueDistribution& dist, int grid_size) {
  if (grid_size < 3) throw std::invalid_argument("concavity grid needs at least 3 points");
  const double h = 1.0 / (grid_size - 1);
  std::vector<double> values(grid_size);
  for (int k = 0; k < grid_size; ++k) {
    values[k] = reward_curve(kind, dist, std::min(1.0, k * h));
  }
  ConcavityReport report;
  report.worst_second_difference = -kInf;
  for (int k = 1; k + 1 < grid_size; ++k) {
    const double d2 = values[k + 1] - 2.0 * values[k] + values[k - 1];
    report.worst_second_difference = std::max(report.worst_second_difference, d2);
  }
  report.concave = report.worst_second_difference <= 1e-9;
  return report;
}

Instance::Instance(int n_, long long m_)
    : n(n_), m(m_), demand(Eigen::MatrixXd::Zero(n_, n_)), dists_(n_ * n_) {}

const ValueDistribution& Instance::dist(int i, int j) const {
  return dists_.at(static_cast<size_t>(i) * n + j);
}

void Instance::set_dist(int i, int j, const ValueDistribution& d) {
  dists_.at(static_cast<size_t>(i) * n + j) = d;
}

void Instance::set_all_dists(const ValueDistribution& d) {
  dists_.assign(static_cast<size_t>(n) * n, d);
}

bool Instance::has_matching_edge(int i, int j) const {
  if (!matching_edges) return false;
  for (const auto& [a, b] : *matching_edges) {
    if ((a == i && b == j) || (a == j && b == i)) return true;
  }
  return false;
}

double Instance::tau(int i, int j) const {
  return travel_time ? (*travel_time)(i, j) : 0.0;
}

double Instance::reward(int i, int j, double q) const {
  return reward_curve(objective, dist(i, j), q);
}

double Instance::per_ride(int i, int j, double q) const {
  return per_ride_reward(objective, dist(i, j), q);
}

QuantilePolicy QuantilePolicy::uniform(int n, double value) {
  QuantilePolicy p;
  p.q = Eigen::MatrixXd::Constant(n, n, value);
  p.q.diagonal().setZero();
  return p;
}

QuantilePolicy QuantilePolicy::from_point(const Eigen::VectorXd& point_q) {
  const int n = static_cast<int>(point_q.size());
  QuantilePolicy p;
  p.q = point_q.replicate(1, n);
  p.q.diagonal().setZero();
  return p;
}

namespace {

// Strong connectivity of {(i,j): phi_ij > 0} via forward and backward reach
// from node 0.
bool strongly_connected(const Eigen::MatrixXd& phi) {
  const int n = static_cast<int>(phi.rows());
  if (n == 1) return true;
  auto reach = [&](bool forward) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack = {0};
    seen[0] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v) {
        const double w = forward ? phi(u, v) : phi(v, u);
        if (w > 0.0 && !seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    }
    return seen;
  };
  const auto fwd = reach(true);
  const auto bwd = reach(false);
  for (int v = 0; v < n; ++v) {
    if (!fwd[v] || !bwd[v]) return false;
  }
  return true;
}

std::string ij(int i, int j) {
  return "(" + std::to_string(i) + "," + std::to_string(j) + ")";
}

}  // namespace

std::vector<Diagnostic> validate_instance(const Instance& inst) {
  std::vector<Diagnostic> diags;
  auto add = [&](const std::string& path, const std::string& msg) {
    diags.push_back({path, msg});
  };

  if (inst.n < 1) {
    add("/n", "station count must be positive");
    return diags;
  }
  if (inst.m != Instance::kInfiniteUnits && inst.m < 1) {
    add("/m", "unit count must be positive or the infinite marker");
  }
  if (inst.demand.rows() != inst.n || inst.demand.cols() != inst.n) {
    add("/demand", "demand matrix must be n x n");
    return diags;
  }

  bool any_demand = false;
  for (int i = 0; i < inst.n; ++i) {
    for (int j = 0; j < inst.n; ++j) {
      const double phi = inst.demand(i, j);
      if (!std::isfinite(phi) || phi < 0.0) {
        add("/demand" + ij(i, j), "arrival rate must be finite and nonnegative");
      }
      if (i == j && phi != 0.0) {
        add("/demand" + ij(i, j), "self-loop demand");
      }
      if (i != j && phi > 0.0) any_demand = true;
    }
  }
  if (!any_demand) add("/demand", "at least one arrival rate must be positive");

  if (any_demand && !strongly_connected(inst.demand)) {
    add("/demand", "demand graph not strongly connected");
  }

  if (inst.travel_time) {
    if (inst.travel_time->rows() != inst.n || inst.travel_time->cols() != inst.n) {
      add("/travel_time", "travel time matrix must be n x n");
    } else {
      for (int i = 0; i < inst.n; ++i)
        for (int j = 0; j < inst.n; ++j)
          if (!std::isfinite((*inst.travel_time)(i, j)) || (*inst.travel_time)(i, j) < 0.0)
            add("/travel_time" + ij(i, j), "mean transit time must be finite and nonnegative");
    }
  }
  if (inst.redirect_cost) {
    if (inst.redirect_cost->rows() != inst.n || inst.redirect_cost->cols() != inst.n) {
      add("/redirect_cost", "redirection cost matrix must be n x n");
    } else {
      for (int i = 0; i < inst.n; ++i)
        for (int j = 0; j < inst.n; ++j)
          if (!std::isfinite((*inst.redirect_cost)(i, j)) || (*inst.redirect_cost)(i, j) < 0.0)
            add("/redirect_cost" + ij(i, j), "redirection cost must be finite and nonnegative");
    }
  }
  if (inst.matching_edges) {
    int k = 0;
    for (const auto& [a, b] : *inst.matching_edges) {
      if (a < 0 || a >= inst.n || b < 0 || b >= inst.n || a == b) {
        add("/matching_edges/" + std::to_string(k), "edge endpoints must be distinct stations");
      }
      ++k;
    }
  }
  if (inst.price_grid) {
    if (static_cast<int>(inst.price_grid->size()) != inst.n) {
      add("/price_grid", "price grid must list one entry per station");
    } else {
      for (int i = 0; i < inst.n; ++i) {
        const auto& g = (*inst.price_grid)[i];
        if (!std::is_sorted(g.begin(), g.end())) {
          add("/price_grid/" + std::to_string(i), "grid prices must be sorted ascending");
        }
      }
    }
  }
  if (inst.multi_objective && inst.multi_objective->requirement < 0.0) {
    add("/multi_objective/requirement", "requirement must be nonnegative");
  }
  return diags;
}

void require_valid(const Instance& instance) {
  auto diags = validate_instance(instance);
  if (!diags.empty()) throw ValidationError(std::move(diags));
}

}  // namespace efr
