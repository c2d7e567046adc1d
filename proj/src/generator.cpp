#include "efr/generator.hpp"

#include <algorithm>
#include <numeric>

#include "rng_util.hpp"

namespace efr {

Instance random_instance(std::uint64_t seed, const GeneratorOptions& opt) {
  detail::Rng rng(detail::splitmix64(seed));
  const int n = rng.uniform_int(opt.min_n, opt.max_n);
  const long long m = opt.min_m + static_cast<long long>(rng.uniform_int(
                                      0, static_cast<int>(opt.max_m - opt.min_m)));
  Instance inst(n, m);

  // Random Hamiltonian cycle guarantees strong connectivity.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(0, i)]);
  for (int i = 0; i < n; ++i) {
    inst.demand(order[i], order[(i + 1) % n]) = rng.uniform(0.1, 2.0);
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i != j && inst.demand(i, j) == 0.0 && rng.uniform() < opt.extra_edge_prob) {
        inst.demand(i, j) = rng.uniform(0.1, 2.0);
      }
    }

  auto draw_dist = [&]() {
    if (rng.uniform() < 0.5) return ValueDistribution::exponential(rng.uniform(0.5, 2.0));
    const double a = rng.uniform(0.0, 0.5);
    return ValueDistribution::uniform(a, a + rng.uniform(0.5, 1.5));
  };
  for (int i = 0; i < n; ++i) {
    ValueDistribution row_dist = draw_dist();
    for (int j = 0; j < n; ++j) {
      inst.set_dist(i, j, opt.per_origin_dists ? row_dist : draw_dist());
    }
  }

  if (opt.vary_objective) {
    const int kind = rng.uniform_int(0, 2);
    inst.objective = kind == 0   ? RewardKind::Throughput
                     : kind == 1 ? RewardKind::Welfare
                                 : RewardKind::Revenue;
  }

  if (opt.with_redirect_cost) {
    Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) cost(i, j) = rng.uniform(0.05, 1.0);
    inst.redirect_cost = std::move(cost);
  }
  if (opt.with_matching_edges) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng.uniform() < 0.5) edges.emplace_back(i, j);
    if (edges.empty()) edges.emplace_back(0, n > 1 ? 1 : 0);
    if (n > 1) inst.matching_edges = std::move(edges);
  }
  return inst;
}

QuantilePolicy random_policy(std::uint64_t seed, const Instance& inst) {
  detail::Rng rng(detail::splitmix64(seed ^ 0xD1B54A32D192ED03ULL));
  QuantilePolicy policy;
  policy.q = Eigen::MatrixXd::Zero(inst.n, inst.n);
  for (int i = 0; i < inst.n; ++i)
    for (int j = 0; j < inst.n; ++j)
      if (inst.has_demand(i, j)) policy.q(i, j) = rng.uniform(0.05, 1.0);
  return policy;
}

}  // namespace efr
