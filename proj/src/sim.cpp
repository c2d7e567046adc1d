#include "efr/sim.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <queue>

#include "rng_util.hpp"

namespace efr {

namespace {

using detail::Rng;
using detail::splitmix64;

struct Transit {
  double time;
  std::uint64_t seq;  // insertion order breaks time ties deterministically
  int dest;
  bool loaded;
  bool operator>(const Transit& other) const {
    return time != other.time ? time > other.time : seq > other.seq;
  }
};

struct RepStats {
  Eigen::MatrixXd flows;
  Eigen::MatrixXd redirects;
  Eigen::VectorXd availability;
  double objective = 0.0;
  std::uint64_t events = 0;
};

struct EdgePick {
  std::vector<double> weights;  // flattened phi, row-major
  double total = 0.0;
};

RepStats run_replication(const Instance& inst, const QuantilePolicy* policy,
                         const StatePolicy* state_policy, const SimConfig& config,
                         std::uint64_t rep_seed) {
  const int n = inst.n;
  const long long m = inst.m;
  Rng rng(rep_seed);

  EdgePick arrivals;
  arrivals.weights.assign(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (inst.has_demand(i, j)) {
        arrivals.weights[static_cast<size_t>(i) * n + j] = inst.demand(i, j);
        arrivals.total += inst.demand(i, j);
      }
    }

  // Units split as evenly as possible, remainder to the lowest indices.
  std::vector<int> x(n, static_cast<int>(m / n));
  for (int i = 0; i < static_cast<int>(m % n); ++i) ++x[i];

  std::priority_queue<Transit, std::vector<Transit>, std::greater<>> transits;
  std::uint64_t seq = 0;
  long long in_transit = 0;

  const double horizon = config.horizon;
  const double warmup = config.warmup_fraction * horizon;
  const double window = horizon - warmup;

  RepStats stats;
  stats.flows = Eigen::MatrixXd::Zero(n, n);
  stats.redirects = Eigen::MatrixXd::Zero(n, n);
  stats.availability = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd ride_counts = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd redirect_counts = Eigen::MatrixXd::Zero(n, n);
  double reward_sum = 0.0;

  double now = 0.0;
  double next_arrival = rng.exponential(1.0 / arrivals.total);

  auto observe = [&](double from, double to) {
    const double lo = std::max(from, warmup);
    const double hi = std::min(to, horizon);
    if (hi <= lo) return;
    for (int i = 0; i < n; ++i) {
      if (x[i] > 0) stats.availability[i] += hi - lo;
    }
  };

  // A unit finishing a customer trip at node b: redirect or settle.
  auto arrive_loaded = [&](int b, double t) {
    int final_node = b;
    if (policy && policy->redirect) {
      double u = rng.uniform();
      for (int c = 0; c < n && final_node == b; ++c) {
        if (c == b) continue;
        u -= (*policy->redirect)(b, c);
        if (u < 0.0) final_node = c;
      }
    }
    if (final_node != b) {
      if (t >= warmup) redirect_counts(b, final_node) += 1.0;
      const double tau = inst.tau(b, final_node);
      if (tau > 0.0) {
        transits.push({t + rng.exponential(tau), seq++, final_node, false});
        ++in_transit;
        return;
      }
    }
    ++x[final_node];
  };

  while (true) {
    const double next_transit = transits.empty() ? horizon + 1.0 : transits.top().time;
    const double t = std::min(next_arrival, next_transit);
    if (t >= horizon) {
      observe(now, horizon);
      break;
    }
    observe(now, t);
    now = t;
    ++stats.events;

    if (next_transit < next_arrival) {
      const Transit done = transits.top();
      transits.pop();
      --in_transit;
      if (done.loaded) {
        arrive_loaded(done.dest, now);
      } else {
        ++x[done.dest];
      }
    } else {
      next_arrival = now + rng.exponential(1.0 / arrivals.total);
      const int flat = rng.pick(arrivals.weights, arrivals.total);
      const int i = flat / n, j = flat % n;

      double q;
      if (state_policy) {
        q = std::clamp((*state_policy)(x, i, j), 0.0, 1.0);
      } else {
        q = policy->q(i, j);
      }
      if (rng.uniform() >= q) continue;  // not willing to pay

      // Serving node: local stock first, then occupied neighbors by the
      // matching weights; lost if nobody can serve.
      int serve = -1;
      if (x[i] > 0) {
        serve = i;
      } else if (policy && policy->matching) {
        std::vector<double> w(n, 0.0);
        double total = 0.0;
        for (int k = 0; k < n; ++k) {
          if (k != i && x[k] > 0 && (*policy->matching)(i, k) > 0.0) {
            w[k] = (*policy->matching)(i, k);
            total += w[k];
          }
        }
        if (total > 0.0) serve = rng.pick(w, total);
      }
      if (serve < 0) continue;  // no unit available

      assert(x[serve] > 0);
      --x[serve];
      if (now >= warmup) {
        ride_counts(i, j) += 1.0;
        reward_sum += inst.per_ride(i, j, q);
      }
      const double tau = inst.tau(serve, j);
      if (tau > 0.0) {
        transits.push({now + rng.exponential(tau), seq++, j, true});
        ++in_transit;
      } else {
        arrive_loaded(j, now);
      }
    }
#ifndef NDEBUG
    long long total_units = in_transit;
    for (int i = 0; i < n; ++i) total_units += x[i];
    assert(total_units == m);
#endif
  }

  stats.availability /= window;
  stats.flows = ride_counts / window;
  stats.redirects = redirect_counts / window;
  stats.objective = reward_sum / window;
  if (inst.redirect_cost) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        stats.objective -= (*inst.redirect_cost)(i, j) * stats.redirects(i, j);
      }
  }
  return stats;
}

SimResult merge(const Instance& inst, const std::vector<RepStats>& reps) {
  const int n = inst.n;
  const int r = static_cast<int>(reps.size());
  SimResult out;
  out.flows = Eigen::MatrixXd::Zero(n, n);
  out.flow_halfwidth = Eigen::MatrixXd::Zero(n, n);
  out.availability = Eigen::VectorXd::Zero(n);
  out.availability_halfwidth = Eigen::VectorXd::Zero(n);
  out.redirect_flows = Eigen::MatrixXd::Zero(n, n);

  for (const auto& rep : reps) {
    out.flows += rep.flows;
    out.availability += rep.availability;
    out.redirect_flows += rep.redirects;
    out.objective += rep.objective;
    out.events += rep.events;
  }
  out.flows /= r;
  out.availability /= r;
  out.redirect_flows /= r;
  out.objective /= r;
  if (r < 2) return out;

  const double z95 = 1.959963984540054;
  const double fac = z95 / std::sqrt(static_cast<double>(r));
  Eigen::MatrixXd flow_var = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd avail_var = Eigen::VectorXd::Zero(n);
  double obj_var = 0.0;
  for (const auto& rep : reps) {
    flow_var += (rep.flows - out.flows).cwiseAbs2();
    avail_var += (rep.availability - out.availability).cwiseAbs2();
    obj_var += (rep.objective - out.objective) * (rep.objective - out.objective);
  }
  out.flow_halfwidth = (flow_var / (r - 1)).cwiseSqrt() * fac;
  out.availability_halfwidth = (avail_var / (r - 1)).cwiseSqrt() * fac;
  out.objective_halfwidth = std::sqrt(obj_var / (r - 1)) * fac;
  return out;
}

void check_config(const Instance& inst, const SimConfig& config) {
  if (inst.infinite_units()) throw std::invalid_argument("simulation needs finite m");
  if (!(config.horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (!(config.warmup_fraction >= 0.0 && config.warmup_fraction < 1.0)) {
    throw std::invalid_argument("warmup fraction must lie in [0,1)");
  }
  if (config.replications < 1) throw std::invalid_argument("need at least one replication");
}

}  // namespace

SimResult simulate(const Instance& inst, const QuantilePolicy& policy, const SimConfig& config) {
  check_config(inst, config);
  std::vector<RepStats> reps;
  reps.reserve(config.replications);
  for (int r = 0; r < config.replications; ++r) {
    const std::uint64_t rep_seed =
        splitmix64(config.seed + (static_cast<std::uint64_t>(r) + 1) * 0x9E3779B97F4A7C15ULL);
    reps.push_back(run_replication(inst, &policy, nullptr, config, rep_seed));
  }
  return merge(inst, reps);
}

SimResult simulate(const Instance& inst, const StatePolicy& policy, const SimConfig& config) {
  check_config(inst, config);
  std::vector<RepStats> reps;
  reps.reserve(config.replications);
  for (int r = 0; r < config.replications; ++r) {
    const std::uint64_t rep_seed =
        splitmix64(config.seed + (static_cast<std::uint64_t>(r) + 1) * 0x9E3779B97F4A7C15ULL);
    reps.push_back(run_replication(inst, nullptr, &policy, config, rep_seed));
  }
  return merge(inst, reps);
}

ObjectiveEstimate estimate_objective(const SimResult& result, const Instance& inst,
                                     const QuantilePolicy& policy) {
  ObjectiveEstimate est;
  for (int i = 0; i < inst.n; ++i)
    for (int j = 0; j < inst.n; ++j) {
      if (result.flows(i, j) > 0.0) {
        est.value += result.flows(i, j) * inst.per_ride(i, j, policy.q(i, j));
      }
      if (inst.redirect_cost) {
        est.value -= (*inst.redirect_cost)(i, j) * result.redirect_flows(i, j);
      }
    }
  est.halfwidth = result.objective_halfwidth;
  return est;
}

}  // namespace efr
