#include "efr/gordon_newell.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "efr/states.hpp"
#include "graph_util.hpp"

namespace efr {

namespace {

constexpr double kMatchResidualTol = 1e-9;

// Matching probabilities with the serve-locally residual on the diagonal.
// Off-diagonal entries are the policy's pull probabilities; the stored
// diagonal is ignored.
Eigen::MatrixXd matching_kernel(const Instance& inst, const QuantilePolicy& pol) {
  const int n = inst.n;
  Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(n, n);
  if (pol.matching) mu = *pol.matching;
  for (int i = 0; i < n; ++i) {
    mu(i, i) = 0.0;
    double pulled = mu.row(i).sum();
    if (pulled > 1.0 + kMatchResidualTol) {
      throw std::invalid_argument("matching probabilities at station " + std::to_string(i) +
                                  " sum to " + std::to_string(pulled) + " > 1");
    }
    mu(i, i) = std::max(0.0, 1.0 - pulled);
  }
  return mu;
}

// P(final node = c | loaded trip ends at b): redirection with probability
// r_bc, stay otherwise.
Eigen::MatrixXd redirect_kernel(const Instance& inst, const QuantilePolicy& pol) {
  const int n = inst.n;
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(n, n);
  if (!pol.redirect) return p;
  for (int b = 0; b < n; ++b) {
    double total = 0.0;
    for (int c = 0; c < n; ++c) {
      if (c == b) continue;
      const double r = (*pol.redirect)(b, c);
      if (r < -1e-12 || r > 1.0 + 1e-9) {
        throw std::invalid_argument("redirect probability out of [0,1]");
      }
      p(b, c) = std::max(0.0, r);
      total += p(b, c);
    }
    if (total > 1.0 + kMatchResidualTol) {
      throw std::invalid_argument("redirect probabilities at station " + std::to_string(b) +
                                  " sum to " + std::to_string(total) + " > 1");
    }
    p(b, b) = std::max(0.0, 1.0 - total);
  }
  return p;
}

// loaded(k, j): rate at which units leave node k carrying a customer bound
// for j, while node k is occupied.
Eigen::MatrixXd loaded_moves(const Instance& inst, const QuantilePolicy& pol) {
  const int n = inst.n;
  Eigen::MatrixXd loaded = Eigen::MatrixXd::Zero(n, n);
  if (!pol.matching) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j && inst.demand(i, j) > 0.0) loaded(i, j) = inst.demand(i, j) * pol.q(i, j);
    return loaded;
  }
  const Eigen::MatrixXd mu = matching_kernel(inst, pol);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j || inst.demand(i, j) <= 0.0) continue;
      const double willing = inst.demand(i, j) * pol.q(i, j);
      if (willing <= 0.0) continue;
      for (int k = 0; k < n; ++k)
        if (mu(i, k) > 0.0) loaded(k, j) += willing * mu(i, k);
    }
  return loaded;
}

struct QueueWeights {
  std::vector<double> rho;       // per-queue weight base
  std::vector<char> poisson;     // link queues carry the 1/x! factor
};

// Normalization constants for a mixed set of geometric and Poisson-weight
// queues via convolution, pre-scaled by the largest weight.
NormalizationConstants mixed_normalization(const QueueWeights& qw, long long m) {
  const int q = static_cast<int>(qw.rho.size());
  if (m < 0) throw std::invalid_argument("unit count must be nonnegative");
  double scale = 0.0;
  for (double r : qw.rho) {
    if (!(r > 0.0) || !std::isfinite(r)) {
      throw std::invalid_argument("queue weights must be positive and finite");
    }
    scale = std::max(scale, r);
  }
  NormalizationConstants G;
  G.scale = scale;
  std::vector<double> g(static_cast<size_t>(m) + 1, 0.0);
  g[0] = 1.0;
  std::vector<double> fresh(g.size());
  for (int queue = 0; queue < q; ++queue) {
    const double rho = qw.rho[queue] / scale;
    if (!qw.poisson[queue]) {
      for (long long k = 1; k <= m; ++k) g[k] += rho * g[k - 1];
    } else {
      std::fill(fresh.begin(), fresh.end(), 0.0);
      for (long long k = 0; k <= m; ++k) {
        double term = 1.0;  // rho^x / x!
        for (long long x = 0; x <= k; ++x) {
          fresh[k] += term * g[k - x];
          term *= rho / static_cast<double>(x + 1);
        }
      }
      g.swap(fresh);
    }
  }
  for (double v : g) {
    if (!std::isfinite(v)) {
      throw NormalizationRangeError("normalization constants overflowed despite pre-scaling");
    }
  }
  G.scaled = std::move(g);
  return G;
}

QueueWeights composite_weights(const CompositeChain& chain, const Eigen::VectorXd& w) {
  QueueWeights qw;
  const int q = static_cast<int>(chain.queues.size());
  qw.rho.resize(q);
  qw.poisson.resize(q);
  for (int k = 0; k < q; ++k) {
    const bool link = chain.queues[k].kind != Queue::Kind::Node;
    qw.poisson[k] = link;
    // node: w/mu; link: w * tau = w / service
    qw.rho[k] = w[k] / chain.service[k];
  }
  return qw;
}

}  // namespace

double NormalizationConstants::value(int k) const {
  const double raw = scaled.at(k) * std::pow(scale, k);
  if (!std::isfinite(raw) || raw <= 0.0) {
    std::ostringstream msg;
    msg << "G_" << k << " outside double range (exponent ~ "
        << k * std::log10(scale) + std::log10(scaled.at(k)) << ")";
    throw NormalizationRangeError(msg.str());
  }
  return raw;
}

double NormalizationConstants::ratio(int k) const {
  if (k < 1 || k >= size()) throw std::out_of_range("normalization ratio index");
  return scaled[k - 1] / (scaled[k] * scale);
}

void node_effective_rates(const Instance& inst, const QuantilePolicy& pol, Eigen::MatrixXd& move,
                          Eigen::VectorXd& service) {
  const Eigen::MatrixXd loaded = loaded_moves(inst, pol);
  move = loaded * redirect_kernel(inst, pol);
  service = loaded.rowwise().sum();
}

RoutingMatrix routing_matrix(const Instance& inst, const QuantilePolicy& pol) {
  Eigen::MatrixXd move;
  Eigen::VectorXd service;
  node_effective_rates(inst, pol, move, service);
  RoutingMatrix routing;
  routing.lambda = Eigen::MatrixXd::Zero(inst.n, inst.n);
  for (int i = 0; i < inst.n; ++i) {
    if (service[i] <= 0.0) {
      throw DeadNodeError(i, "dead node " + std::to_string(i) +
                                 ": zero effective demand, chain would be reducible");
    }
    routing.lambda.row(i) = move.row(i) / service[i];
  }
  return routing;
}

Eigen::VectorXd invariant_distribution(const Eigen::MatrixXd& lambda) {
  const int n = static_cast<int>(lambda.rows());
  if (n == 1) return Eigen::VectorXd::Ones(1);

  const auto comp = detail::strongly_connected_components(lambda);
  if (detail::component_count(comp) > 1) {
    auto cut = detail::terminal_component(lambda, comp);
    std::ostringstream msg;
    msg << "routing chain is reducible; no transitions leave the node cut {";
    for (size_t k = 0; k < cut.size(); ++k) msg << (k ? "," : "") << cut[k];
    msg << "}";
    throw ReducibleError(std::move(cut), msg.str());
  }

  auto residual = [&](const Eigen::VectorXd& w) {
    return (lambda.transpose() * w - w).cwiseAbs().maxCoeff();
  };

  Eigen::MatrixXd system = lambda.transpose() - Eigen::MatrixXd::Identity(n, n);
  system.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[n - 1] = 1.0;
  Eigen::VectorXd w = system.partialPivLu().solve(rhs);

  if (!w.allFinite() || w.minCoeff() <= 0.0 || residual(w) > 1e-12) {
    // Lazy power iteration: (I + lambda)/2 shares the invariant vector and is
    // aperiodic, so it converges for periodic chains too.
    w = Eigen::VectorXd::Constant(n, 1.0 / n);
    for (int it = 0; it < 2000000; ++it) {
      Eigen::VectorXd next = 0.5 * (w + lambda.transpose() * w);
      next /= next.sum();
      const double step = (next - w).cwiseAbs().maxCoeff();
      w = std::move(next);
      if (step < 1e-16 && residual(w) <= 1e-12) break;
    }
    if (residual(w) > 1e-12) {
      throw std::runtime_error("invariant distribution did not reach residual 1e-12");
    }
  }
  return w / w.sum();
}

Eigen::VectorXd invariant_distribution(const RoutingMatrix& routing) {
  return invariant_distribution(routing.lambda);
}

Eigen::VectorXd traffic_intensities(const Instance& inst, const QuantilePolicy& pol,
                                    const Eigen::VectorXd& w) {
  Eigen::MatrixXd move;
  Eigen::VectorXd service;
  node_effective_rates(inst, pol, move, service);
  Eigen::VectorXd r(inst.n);
  for (int i = 0; i < inst.n; ++i) {
    if (service[i] <= 0.0) {
      throw DeadNodeError(i, "dead node " + std::to_string(i) + ": zero effective service rate");
    }
    r[i] = w[i] / service[i];
  }
  return r;
}

NormalizationConstants buzen_normalization(const Eigen::VectorXd& r, long long m) {
  QueueWeights qw;
  qw.rho.assign(r.data(), r.data() + r.size());
  qw.poisson.assign(r.size(), 0);
  return mixed_normalization(qw, m);
}

Eigen::VectorXd availabilities(const Eigen::VectorXd& r, const NormalizationConstants& G,
                               long long m) {
  const double ratio = G.ratio(static_cast<int>(m));
  Eigen::VectorXd a = r * ratio;
  for (int i = 0; i < a.size(); ++i) a[i] = std::min(a[i], 1.0);
  return a;
}

CompositeChain composite_chain(const Instance& inst, const QuantilePolicy& pol) {
  const int n = inst.n;
  CompositeChain chain;
  chain.n = n;

  const Eigen::MatrixXd loaded = loaded_moves(inst, pol);
  const Eigen::MatrixXd redirect = redirect_kernel(inst, pol);
  chain.move = loaded * redirect;

  Eigen::VectorXd service = loaded.rowwise().sum();
  for (int i = 0; i < n; ++i) {
    if (service[i] <= 0.0) {
      throw DeadNodeError(i, "dead node " + std::to_string(i) +
                                 ": zero effective demand, chain would be reducible");
    }
  }

  for (int i = 0; i < n; ++i) chain.queues.push_back({Queue::Kind::Node, i, i});

  const Eigen::VectorXd inbound_loaded = loaded.colwise().sum();
  std::vector<std::vector<int>> loaded_link(n, std::vector<int>(n, -1));
  std::vector<std::vector<int>> empty_link(n, std::vector<int>(n, -1));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      if (loaded(a, b) > 0.0 && inst.tau(a, b) > 0.0) {
        loaded_link[a][b] = static_cast<int>(chain.queues.size());
        chain.queues.push_back({Queue::Kind::LoadedLink, a, b});
      }
  for (int b = 0; b < n; ++b)
    for (int c = 0; c < n; ++c)
      if (b != c && redirect(b, c) > 0.0 && inbound_loaded[b] > 0.0 && inst.tau(b, c) > 0.0) {
        empty_link[b][c] = static_cast<int>(chain.queues.size());
        chain.queues.push_back({Queue::Kind::EmptyLink, b, c});
      }

  const int q = static_cast<int>(chain.queues.size());
  chain.routing = Eigen::MatrixXd::Zero(q, q);
  chain.service = Eigen::VectorXd::Zero(q);
  for (int i = 0; i < n; ++i) chain.service[i] = service[i];

  // Where a loaded trip ending at b deposits probability mass: the node stays
  // put, redirections go through an empty link when one exists.
  auto end_of_loaded_trip = [&](int b, double p, int source_queue) {
    for (int c = 0; c < n; ++c) {
      const double share = redirect(b, c);
      if (share <= 0.0) continue;
      if (c != b && empty_link[b][c] >= 0) {
        chain.routing(source_queue, empty_link[b][c]) += p * share;
      } else {
        chain.routing(source_queue, c) += p * share;
      }
    }
  };

  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (loaded(a, b) <= 0.0) continue;
      const double p = loaded(a, b) / service[a];
      if (loaded_link[a][b] >= 0) {
        chain.routing(a, loaded_link[a][b]) += p;
      } else {
        end_of_loaded_trip(b, p, a);
      }
    }
  }
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (loaded_link[a][b] < 0) continue;
      const int idx = loaded_link[a][b];
      chain.service[idx] = 1.0 / inst.tau(a, b);
      end_of_loaded_trip(b, 1.0, idx);
    }
  for (int b = 0; b < n; ++b)
    for (int c = 0; c < n; ++c) {
      if (empty_link[b][c] < 0) continue;
      const int idx = empty_link[b][c];
      chain.service[idx] = 1.0 / inst.tau(b, c);
      chain.routing(idx, c) = 1.0;
    }
  return chain;
}

namespace {

// Realized customer trip rates given per-node availabilities.
Eigen::MatrixXd realized_flows(const Instance& inst, const QuantilePolicy& pol,
                               const Eigen::VectorXd& avail) {
  const int n = inst.n;
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(n, n);
  if (!pol.matching) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j && inst.demand(i, j) > 0.0) f(i, j) = avail[i] * inst.demand(i, j) * pol.q(i, j);
    return f;
  }
  const Eigen::MatrixXd mu = matching_kernel(inst, pol);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j || inst.demand(i, j) <= 0.0) continue;
      const double willing = inst.demand(i, j) * pol.q(i, j);
      if (willing <= 0.0) continue;
      double served = 0.0;
      for (int k = 0; k < n; ++k) served += mu(i, k) * avail[k];
      f(i, j) = willing * served;
    }
  return f;
}

Eigen::MatrixXd redirected_flows(const Instance& inst, const QuantilePolicy& pol,
                                 const Eigen::MatrixXd& flows) {
  const int n = inst.n;
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, n);
  if (!pol.redirect) return z;
  const Eigen::VectorXd arrivals = flows.colwise().sum();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) z(i, j) = (*pol.redirect)(i, j) * arrivals[i];
  return z;
}

double objective_value(const Instance& inst, const QuantilePolicy& pol,
                       const Eigen::MatrixXd& flows, const Eigen::MatrixXd& z) {
  double total = 0.0;
  for (int i = 0; i < inst.n; ++i)
    for (int j = 0; j < inst.n; ++j) {
      if (flows(i, j) > 0.0) total += flows(i, j) * inst.per_ride(i, j, pol.q(i, j));
      if (inst.redirect_cost && z(i, j) > 0.0) total -= (*inst.redirect_cost)(i, j) * z(i, j);
    }
  return total;
}

Eigen::VectorXd node_contributions(const Instance& inst, const QuantilePolicy& pol) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(inst.n);
  for (int i = 0; i < inst.n; ++i)
    for (int j = 0; j < inst.n; ++j) {
      if (i == j || inst.demand(i, j) <= 0.0) continue;
      const double rate = inst.demand(i, j) * pol.q(i, j);
      if (rate > 0.0) b[i] += rate * inst.per_ride(i, j, pol.q(i, j));
    }
  return b;
}

// Shared assembly of the finite and infinite summaries.
SteadyStateSummary assemble_summary(const Instance& inst, const QuantilePolicy& pol, long long m) {
  const CompositeChain chain = composite_chain(inst, pol);
  const Eigen::VectorXd w_comp = invariant_distribution(chain.routing);
  const QueueWeights weights = composite_weights(chain, w_comp);

  SteadyStateSummary s;
  s.m = m;
  s.mu = chain.service.head(inst.n);
  s.r = Eigen::VectorXd::Map(weights.rho.data(), inst.n);
  s.w = w_comp.head(inst.n) / w_comp.head(inst.n).sum();

  const double r_max = s.r.maxCoeff();
  Eigen::VectorXd avail_inf = s.r / r_max;

  if (m == Instance::kInfiniteUnits) {
    s.g_ratio = 1.0 / r_max;
    s.availability = avail_inf;
  } else {
    s.G = mixed_normalization(weights, m);
    s.g_ratio = s.G.ratio(static_cast<int>(m));
    s.availability = availabilities(s.r, s.G, m);
  }

  s.flows = realized_flows(inst, pol, s.availability);
  s.redirect_flows = redirected_flows(inst, pol, s.flows);
  s.node_contribution = node_contributions(inst, pol);
  s.obj = objective_value(inst, pol, s.flows, s.redirect_flows);

  const Eigen::MatrixXd flows_inf = realized_flows(inst, pol, avail_inf);
  s.obj_inf = objective_value(inst, pol, flows_inf, redirected_flows(inst, pol, flows_inf));

  // Elevated value of the policy's own quantiles; redirection enters at the
  // all-available rates z_ij = r_ij * sum_k phi_ki q_ki.
  s.elevated = elevated_objective(inst, pol.q);
  if (pol.redirect && inst.redirect_cost) {
    const Eigen::MatrixXd full = realized_flows(inst, pol, Eigen::VectorXd::Ones(inst.n));
    const Eigen::MatrixXd z_full = redirected_flows(inst, pol, full);
    for (int i = 0; i < inst.n; ++i)
      for (int j = 0; j < inst.n; ++j) s.elevated -= (*inst.redirect_cost)(i, j) * z_full(i, j);
  }
  return s;
}

}  // namespace

SteadyStateSummary steady_state_summary(const Instance& inst, const QuantilePolicy& pol,
                                        long long m) {
  if (m < 1) throw std::invalid_argument("steady_state_summary needs m >= 1");
  return assemble_summary(inst, pol, m);
}

SteadyStateSummary infinite_unit_summary(const Instance& inst, const QuantilePolicy& pol) {
  return assemble_summary(inst, pol, Instance::kInfiniteUnits);
}

double elevated_objective(const Instance& inst, const Eigen::MatrixXd& q_hat) {
  double total = 0.0;
  for (int i = 0; i < inst.n; ++i)
    for (int j = 0; j < inst.n; ++j) {
      if (i == j || inst.demand(i, j) <= 0.0) continue;
      const double q = std::clamp(q_hat(i, j), 0.0, 1.0);
      if (std::abs(q - q_hat(i, j)) > 1e-9) {
        throw std::domain_error("relaxed quantile outside [0,1]");
      }
      total += inst.demand(i, j) * inst.reward(i, j, q);
    }
  return total;
}

double elevated_objective(const Instance& inst, const Eigen::MatrixXd& q_hat,
                          const Eigen::MatrixXd& z_hat) {
  double total = elevated_objective(inst, q_hat);
  if (inst.redirect_cost) {
    for (int i = 0; i < inst.n; ++i)
      for (int j = 0; j < inst.n; ++j) total -= (*inst.redirect_cost)(i, j) * z_hat(i, j);
  }
  return total;
}

StationaryDistribution stationary_distribution_explicit(const Instance& inst,
                                                        const QuantilePolicy& pol, long long m,
                                                        long long cap) {
  RoutingMatrix routing = routing_matrix(inst, pol);
  const Eigen::VectorXd w = invariant_distribution(routing);
  const Eigen::VectorXd r = traffic_intensities(inst, pol, w);
  const Eigen::VectorXd rho = r / r.maxCoeff();

  StationaryDistribution dist;
  for (int i = 0; i < inst.n; ++i) dist.queues.push_back({Queue::Kind::Node, i, i});
  dist.states = enumerate_states(inst.n, m, cap);
  dist.probability.resize(static_cast<long>(dist.states.size()));
  for (size_t s = 0; s < dist.states.size(); ++s) {
    double weight = 1.0;
    for (int i = 0; i < inst.n; ++i) weight *= std::pow(rho[i], dist.states[s][i]);
    dist.probability[static_cast<long>(s)] = weight;
  }
  dist.probability /= dist.probability.sum();
  return dist;
}

StationaryDistribution delay_stationary_explicit(const Instance& inst, const QuantilePolicy& pol,
                                                 long long m, long long cap) {
  if (!inst.travel_time) {
    throw std::invalid_argument("delay_stationary_explicit needs travel times");
  }
  const CompositeChain chain = composite_chain(inst, pol);
  const Eigen::VectorXd w = invariant_distribution(chain.routing);
  const QueueWeights weights = composite_weights(chain, w);
  const double scale = *std::max_element(weights.rho.begin(), weights.rho.end());

  StationaryDistribution dist;
  dist.queues = chain.queues;
  dist.states = enumerate_states(static_cast<int>(chain.queues.size()), m, cap);
  dist.probability.resize(static_cast<long>(dist.states.size()));
  for (size_t s = 0; s < dist.states.size(); ++s) {
    double weight = 1.0;
    for (size_t k = 0; k < chain.queues.size(); ++k) {
      const int x = dist.states[s][k];
      weight *= std::pow(weights.rho[k] / scale, x);
      if (weights.poisson[k]) {
        for (int y = 2; y <= x; ++y) weight /= y;
      }
    }
    dist.probability[static_cast<long>(s)] = weight;
  }
  dist.probability /= dist.probability.sum();
  return dist;
}

}  // namespace efr
