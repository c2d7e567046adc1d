#include <doctest.h>

#include <cmath>

#include "efr/generator.hpp"
#include "efr/gordon_newell.hpp"
#include "efr/policy.hpp"
#include "efr/relax.hpp"
#include "rng_util.hpp"

using namespace efr;

namespace {

Instance line_instance(int n, double k, long long m) {
  Instance inst(n, m);
  inst.objective = RewardKind::Throughput;
  for (int i = 0; i + 1 < n; ++i) inst.demand(i, i + 1) = k;
  inst.demand(n - 1, 0) = 1.0;
  inst.set_all_dists(ValueDistribution::uniform(0.0, 1.0));
  return inst;
}

// Two disjoint two-cycles {0,1} and {2,3} with balanced flows, bridged only
// by zero-flow cross demand.
std::pair<Instance, Eigen::MatrixXd> disconnected_circulation(std::uint64_t seed) {
  detail::Rng rng(detail::splitmix64(seed));
  Instance inst(4, 2);
  inst.objective = RewardKind::Throughput;
  inst.demand(0, 1) = rng.uniform(0.5, 2.0);
  inst.demand(1, 0) = rng.uniform(0.5, 2.0);
  inst.demand(2, 3) = rng.uniform(0.5, 2.0);
  inst.demand(3, 2) = rng.uniform(0.5, 2.0);
  inst.demand(0, 2) = rng.uniform(0.5, 2.0);
  inst.demand(2, 0) = rng.uniform(0.5, 2.0);
  inst.set_all_dists(ValueDistribution::uniform(0.0, 1.0));

  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(4, 4);
  // balance each cycle: f = min rate * level
  const double f01 = 0.4 * std::min(inst.demand(0, 1), inst.demand(1, 0));
  const double f23 = 0.7 * std::min(inst.demand(2, 3), inst.demand(3, 2));
  q(0, 1) = f01 / inst.demand(0, 1);
  q(1, 0) = f01 / inst.demand(1, 0);
  q(2, 3) = f23 / inst.demand(2, 3);
  q(3, 2) = f23 / inst.demand(3, 2);
  return {std::move(inst), std::move(q)};
}

}  // namespace

TEST_CASE("prices_from_relaxation") {
  SUBCASE("uniform quantile maps through the inverse demand") {
    Instance inst(2, 1);
    inst.demand(0, 1) = 1.0;
    inst.demand(1, 0) = 1.0;
    inst.set_all_dists(ValueDistribution::uniform(0.0, 1.0));
    RelaxSolution sol;
    sol.variant = RelaxVariant::Efr;
    sol.q = QuantilePolicy::uniform(2, 0.5).q;
    const auto policy = prices_from_relaxation(inst, sol);
    CHECK(policy.prices(0, 1) == doctest::Approx(0.5));
    CHECK(policy.quantiles.q(0, 1) == doctest::Approx(0.5));
    // round trip within 1e-10
    CHECK(price_to_quantile(inst.dist(0, 1), policy.prices(0, 1)) ==
          doctest::Approx(policy.quantiles.q(0, 1)).epsilon(1e-10));
  }
  SUBCASE("zero redirection rates give zero probabilities") {
    Instance inst(2, 1);
    inst.demand(0, 1) = 1.0;
    inst.demand(1, 0) = 1.0;
    inst.set_all_dists(ValueDistribution::uniform(0.0, 1.0));
    inst.redirect_cost = Eigen::MatrixXd::Constant(2, 2, 1.0);
    RelaxSolution sol;
    sol.variant = RelaxVariant::SupplyRedirection;
    sol.q = QuantilePolicy::uniform(2, 1.0).q;
    sol.z = Eigen::MatrixXd::Zero(2, 2);
    const auto policy = prices_from_relaxation(inst, sol);
    REQUIRE(policy.quantiles.redirect.has_value());
    CHECK(policy.quantiles.redirect->cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("line instance prices the heavy edges at the 1/k quantile") {
    const Instance inst = line_instance(3, 10.0, 2);
    const auto sol = solve_efr(inst);
    const auto policy = prices_from_relaxation(inst, sol);
    const double expected = quantile_to_price(inst.dist(0, 1), 0.1);
    CHECK(policy.prices(0, 1) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(policy.prices(1, 2) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(policy.prices(2, 0) == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("redirection probabilities are valid rows") {
    for (std::uint64_t seed = 700; seed < 720; ++seed) {
      GeneratorOptions opt;
      opt.with_matching_edges = false;
      const Instance inst = random_instance(seed, opt);
      const auto sol = solve_efr_supply_redirection(inst);
      const auto policy = prices_from_relaxation(inst, sol);
      REQUIRE(policy.quantiles.redirect.has_value());
      for (int i = 0; i < inst.n; ++i) {
        CHECK(policy.quantiles.redirect->row(i).minCoeff() >= 0.0);
        CHECK(policy.quantiles.redirect->row(i).sum() <= 1.0 + 1e-9);
      }
    }
  }
}

TEST_CASE("round_to_discrete_grid") {
  Instance inst(2, 1);
  inst.demand(0, 1) = 1.0;
  inst.demand(1, 0) = 1.0;
  inst.set_all_dists(ValueDistribution::uniform(0.0, 1.0));

  SUBCASE("rounds up to the next grid price") {
    inst.price_grid = std::vector<std::vector<double>>{{0.3, 0.6, 0.9}, {0.3, 0.6, 0.9}};
    Eigen::VectorXd solved(2);
    solved << 0.5, 0.6;
    const auto report = round_to_discrete_grid(inst, solved);
    CHECK(report.rounded_prices[0] == doctest::Approx(0.6));
    CHECK(report.rounded_quantiles[0] == doctest::Approx(0.4));
    CHECK(report.rounded_prices[1] == doctest::Approx(0.6));  // exact hit unchanged
    CHECK(report.coverage_ok);
    // monotonicity
    for (int i = 0; i < 2; ++i) {
      CHECK(report.rounded_prices[i] >= report.solved_prices[i] - 1e-12);
      CHECK(report.rounded_quantiles[i] <= report.solved_quantiles[i] + 1e-12);
    }
  }
  SUBCASE("grid-gap ratio of consecutive quantiles") {
    // quantiles 1, 0.5, 0.25 on Uniform(0,1) come from prices 0, 0.5, 0.75
    inst.price_grid = std::vector<std::vector<double>>{{0.0, 0.5, 0.75}, {0.0, 0.5, 0.75}};
    Eigen::VectorXd solved(2);
    solved << 0.2, 0.2;
    const auto report = round_to_discrete_grid(inst, solved);
    CHECK(report.grid_gap_ratio == doctest::Approx(2.0));
  }
  SUBCASE("uncovered stations are flagged, not fatal") {
    inst.price_grid = std::vector<std::vector<double>>{{0.1, 0.2}, {0.1, 0.2}};
    Eigen::VectorXd solved(2);
    solved << 0.5, 0.1;
    const auto report = round_to_discrete_grid(inst, solved);
    CHECK_FALSE(report.coverage_ok);
    REQUIRE(report.uncovered_stations.size() == 1);
    CHECK(report.uncovered_stations[0] == 0);
    CHECK(report.rounded_prices[0] == doctest::Approx(0.2));
  }
  SUBCASE("empty grid is a precondition error") {
    inst.price_grid = std::vector<std::vector<double>>{{}, {0.5}};
    Eigen::VectorXd solved(2);
    solved << 0.5, 0.5;
    CHECK_THROWS_AS(round_to_discrete_grid(inst, solved), std::invalid_argument);
  }
}

TEST_CASE("demand_circulation_check") {
  Instance inst(2, 1);
  inst.demand(0, 1) = 2.0;
  inst.demand(1, 0) = 1.0;
  inst.set_all_dists(ValueDistribution::uniform(0.0, 1.0));

  SUBCASE("balanced") {
    Instance sym(2, 1);
    sym.demand(0, 1) = 1.0;
    sym.demand(1, 0) = 1.0;
    sym.set_all_dists(ValueDistribution::uniform(0.0, 1.0));
    const auto report = demand_circulation_check(sym, QuantilePolicy::uniform(2, 1.0).q, 1e-10);
    CHECK(report.balanced);
    CHECK(report.worst_imbalance == doctest::Approx(0.0));
  }
  SUBCASE("imbalance measured") {
    const auto report = demand_circulation_check(inst, QuantilePolicy::uniform(2, 1.0).q, 1e-10);
    CHECK_FALSE(report.balanced);
    CHECK(report.worst_imbalance == doctest::Approx(1.0));
  }
  SUBCASE("solver outputs circulate") {
    for (std::uint64_t seed = 900; seed < 920; ++seed) {
      const Instance random = random_instance(seed);
      const auto sol = solve_efr(random);
      CHECK(demand_circulation_check(random, sol.q, 1e-8).balanced);
    }
  }
}

TEST_CASE("connectivity_repair") {
  SUBCASE("connected input is returned unchanged") {
    Instance inst(2, 1);
    inst.demand(0, 1) = 1.0;
    inst.demand(1, 0) = 1.0;
    inst.set_all_dists(ValueDistribution::uniform(0.0, 1.0));
    const Eigen::MatrixXd q = QuantilePolicy::uniform(2, 0.5).q;
    const Eigen::MatrixXd repaired = connectivity_repair(inst, q, 0.01);
    CHECK((repaired - q).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("two cycles get bridged") {
    const auto [inst, q] = disconnected_circulation(1);
    const Eigen::MatrixXd repaired = connectivity_repair(inst, q, 0.01);
    // support strongly connected: flows on a bridging cycle appear
    CHECK(repaired(0, 2) > 0.0);
    CHECK(repaired(2, 0) > 0.0);
    // original flows keep at least 99%
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        if (q(i, j) <= 0.0) continue;
        CHECK(repaired(i, j) * inst.demand(i, j) >= 0.99 * q(i, j) * inst.demand(i, j) - 1e-12);
      }
    CHECK(demand_circulation_check(inst, repaired, 1e-10).balanced);
  }
  SUBCASE("repair preserves circulation and value on random inputs") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto [inst, q] = disconnected_circulation(seed);
      const double eps = 0.01;
      const Eigen::MatrixXd repaired = connectivity_repair(inst, q, eps);
      CHECK(demand_circulation_check(inst, repaired, 1e-10).balanced);
      CHECK(elevated_objective(inst, repaired) >=
            (1.0 - eps) * elevated_objective(inst, q) - 1e-12);
      // exactly one strongly connected component: the routing chain solves
      QuantilePolicy policy;
      policy.q = repaired;
      CHECK_NOTHROW(invariant_distribution(routing_matrix(inst, policy)));
      for (int i = 0; i < inst.n; ++i)
        for (int j = 0; j < inst.n; ++j) {
          if (q(i, j) > 0.0) {
            CHECK(repaired(i, j) >= (1.0 - eps) * q(i, j) - 1e-12);
          }
        }
    }
  }
  SUBCASE("non-circulation input is rejected") {
    Instance inst(2, 1);
    inst.demand(0, 1) = 2.0;
    inst.demand(1, 0) = 1.0;
    inst.set_all_dists(ValueDistribution::uniform(0.0, 1.0));
    CHECK_THROWS_AS(connectivity_repair(inst, QuantilePolicy::uniform(2, 1.0).q, 0.01),
                    std::invalid_argument);
  }
}
