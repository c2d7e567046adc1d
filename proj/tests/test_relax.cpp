#include <doctest.h>

#include <cmath>

#include "efr/generator.hpp"
#include "efr/gordon_newell.hpp"
#include "efr/policy.hpp"
#include "efr/relax.hpp"
#include "oracles.hpp"

using namespace efr;

namespace {

Instance two_node(double phi12, double phi21, RewardKind kind = RewardKind::Throughput,
                  ValueDistribution dist = ValueDistribution::uniform(0.0, 1.0)) {
  Instance inst(2, 1);
  inst.objective = kind;
  inst.demand(0, 1) = phi12;
  inst.demand(1, 0) = phi21;
  inst.set_all_dists(dist);
  return inst;
}

// Appendix-style line instance: a directed cycle with heavy forward demand
// and a single unit-rate return edge.
Instance line_instance(int n, double k, long long m) {
  Instance inst(n, m);
  inst.objective = RewardKind::Throughput;
  for (int i = 0; i + 1 < n; ++i) inst.demand(i, i + 1) = k;
  inst.demand(n - 1, 0) = 1.0;
  inst.set_all_dists(ValueDistribution::uniform(0.0, 1.0));
  return inst;
}

}  // namespace

TEST_CASE("lp_solve") {
  SUBCASE("tied box maximum") {
    LinearProgram lp;
    lp.objective = Eigen::VectorXd::Ones(2);
    lp.lower = Eigen::VectorXd::Zero(2);
    lp.upper = Eigen::VectorXd::Ones(2);
    Eigen::VectorXd row(2);
    row << 1.0, -1.0;
    lp.add_row(row, RowSense::Eq, 0.0);
    const auto sol = lp_solve(lp);
    REQUIRE(sol.status == LpSolution::Status::Optimal);
    CHECK(sol.value == doctest::Approx(2.0));
    CHECK(sol.x[0] == doctest::Approx(1.0));
    CHECK(sol.x[1] == doctest::Approx(1.0));
  }
  SUBCASE("weighted circulation") {
    LinearProgram lp;
    lp.objective = Eigen::VectorXd(2);
    lp.objective << 2.0, 1.0;
    lp.lower = Eigen::VectorXd::Zero(2);
    lp.upper = Eigen::VectorXd::Ones(2);
    Eigen::VectorXd row(2);
    row << 2.0, -1.0;
    lp.add_row(row, RowSense::Eq, 0.0);
    const auto sol = lp_solve(lp);
    REQUIRE(sol.status == LpSolution::Status::Optimal);
    CHECK(sol.value == doctest::Approx(2.0));
    CHECK(sol.x[0] == doctest::Approx(0.5));
    CHECK(sol.x[1] == doctest::Approx(1.0));
  }
  SUBCASE("contradictory equalities certify infeasibility") {
    LinearProgram lp;
    lp.objective = Eigen::VectorXd::Zero(1);
    lp.lower = Eigen::VectorXd::Zero(1);
    lp.upper = Eigen::VectorXd::Ones(1);
    Eigen::VectorXd row(1);
    row << 1.0;
    lp.add_row(row, RowSense::Eq, 0.0);
    lp.add_row(row, RowSense::Eq, 1.0);
    const auto sol = lp_solve(lp);
    REQUIRE(sol.status == LpSolution::Status::Infeasible);
    CHECK_FALSE(sol.infeasible_rows.empty());
  }
  SUBCASE("inequalities and unbounded detection") {
    LinearProgram lp;
    lp.objective = Eigen::VectorXd::Ones(2);
    lp.lower = Eigen::VectorXd::Zero(2);
    lp.upper = Eigen::VectorXd::Constant(2, std::numeric_limits<double>::infinity());
    Eigen::VectorXd row(2);
    row << 1.0, 1.0;
    lp.add_row(row, RowSense::Le, 3.0);
    auto sol = lp_solve(lp);
    REQUIRE(sol.status == LpSolution::Status::Optimal);
    CHECK(sol.value == doctest::Approx(3.0));

    LinearProgram free = lp;
    free.rhs[0] = 3.0;
    free.sense[0] = RowSense::Ge;
    CHECK(lp_solve(free).status == LpSolution::Status::Unbounded);
  }
}

TEST_CASE("solve_efr") {
  SUBCASE("two-node symmetric throughput saturates") {
    const auto sol = solve_efr(two_node(1.0, 1.0));
    CHECK(sol.value == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(sol.q(0, 1) == doctest::Approx(1.0));
    CHECK(sol.q(1, 0) == doctest::Approx(1.0));
    CHECK(sol.gap <= 1e-6);
  }
  SUBCASE("line instance quantiles") {
    const auto sol = solve_efr(line_instance(3, 10.0, 2));
    CHECK(sol.value == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(sol.q(0, 1) == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(sol.q(1, 2) == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(sol.q(2, 0) == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("revenue with circulation constraint") {
    const auto sol = solve_efr(two_node(1.0, 1.0, RewardKind::Revenue));
    // symmetric circulation forces q01 = q10 = t; max 2 t (1 - t) at t = 1/2.
    // The certified gap bounds the value; the argmax tolerance follows from
    // the curvature (value deficit d moves t by sqrt(d / 2)).
    CHECK(sol.value == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(sol.gap <= 1e-6 * std::max(1.0, sol.upper_bound));
    CHECK(std::abs(sol.q(0, 1) - 0.5) <= std::sqrt(sol.gap / 2.0) + 1e-9);

    SolverConfig tight;
    tight.gap_tolerance = 1e-12;
    const auto precise = solve_efr(two_node(1.0, 1.0, RewardKind::Revenue), tight);
    CHECK(precise.q(0, 1) == doctest::Approx(0.5).epsilon(1e-5));
    CHECK(precise.gap <= 1e-12 * std::max(1.0, precise.upper_bound) + 1e-15);
  }
  SUBCASE("welfare with increasing reward saturates") {
    const auto sol =
        solve_efr(two_node(1.0, 1.0, RewardKind::Welfare, ValueDistribution::exponential(1.0)));
    // grid-scan oracle: R(q) = q (1 - ln q) increases to R(1) = 1 per edge
    double best = 0.0;
    for (int k = 1; k <= 1000; ++k) {
      const double q = k / 1000.0;
      best = std::max(best, 2.0 * q * (1.0 - std::log(q)));
    }
    CHECK(best == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(sol.value == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(sol.q(0, 1) == doctest::Approx(1.0));
  }
  SUBCASE("throughput equals the max-circulation oracle on random instances") {
    for (std::uint64_t seed = 40; seed < 52; ++seed) {
      GeneratorOptions opt;
      opt.min_n = 4;
      opt.max_n = 4;
      opt.vary_objective = false;
      opt.with_matching_edges = false;
      opt.with_redirect_cost = false;
      const Instance inst = random_instance(seed, opt);
      std::vector<oracle::Arc> arcs;
      for (int i = 0; i < inst.n; ++i)
        for (int j = 0; j < inst.n; ++j)
          if (inst.has_demand(i, j)) arcs.push_back({i, j, inst.demand(i, j), 1.0});
      const double expected = oracle::max_value_circulation(inst.n, arcs);
      const auto sol = solve_efr(inst);
      CHECK(sol.value == doctest::Approx(expected).epsilon(1e-8));
    }
  }
  SUBCASE("outputs satisfy demand circulation") {
    for (std::uint64_t seed = 60; seed < 80; ++seed) {
      const Instance inst = random_instance(seed);
      const auto sol = solve_efr(inst);
      CHECK(demand_circulation_check(inst, sol.q, 1e-8).balanced);
      CHECK(sol.gap >= 0.0);
    }
  }
  SUBCASE("deterministic across calls") {
    const Instance inst = random_instance(123);
    const auto a = solve_efr(inst);
    const auto b = solve_efr(inst);
    CHECK((a.q - b.q).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.value == b.value);
  }
}

TEST_CASE("solve_efr_supply_redirection") {
  SUBCASE("free redirection on balanced demand stays unused") {
    Instance inst = two_node(1.0, 1.0);
    inst.redirect_cost = Eigen::MatrixXd::Zero(2, 2);
    const auto sol = solve_efr_supply_redirection(inst);
    REQUIRE(sol.z.has_value());
    CHECK(sol.z->cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(sol.value == doctest::Approx(2.0).epsilon(1e-9));
  }
  SUBCASE("prohibitive costs force z to zero") {
    Instance inst = two_node(2.0, 1.0);
    inst.redirect_cost = Eigen::MatrixXd::Constant(2, 2, 1e4);
    const auto sol = solve_efr_supply_redirection(inst);
    CHECK(sol.z->cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("cheap back-redirection beats pricing alone") {
    Instance inst(3, 2);
    inst.objective = RewardKind::Throughput;
    inst.demand(0, 1) = 1.0;
    inst.demand(1, 2) = 1.0;
    inst.demand(2, 0) = 0.05;  // weak return demand
    inst.set_all_dists(ValueDistribution::uniform(0.0, 1.0));
    Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(3, 3, 0.01);
    cost.diagonal().setZero();
    inst.redirect_cost = cost;
    const auto base = solve_efr(inst);
    const auto redirected = solve_efr_supply_redirection(inst);
    CHECK(redirected.value > base.value + 0.5);
    CHECK(redirected.z->sum() > 0.1);
  }
  SUBCASE("requires redirect_cost") {
    CHECK_THROWS_AS(solve_efr_supply_redirection(two_node(1.0, 1.0)), std::invalid_argument);
  }
}

TEST_CASE("solve_efr_matching") {
  SUBCASE("empty edge set reduces to the plain relaxation") {
    Instance inst = two_node(2.0, 1.0);
    inst.matching_edges = std::vector<std::pair<int, int>>{};
    const auto matched = solve_efr_matching(inst);
    const auto plain = solve_efr(inst);
    CHECK(matched.value == doctest::Approx(plain.value).epsilon(1e-10));
  }
  SUBCASE("complete edges on balanced demand change nothing") {
    Instance inst = two_node(1.0, 1.0);
    inst.matching_edges = std::vector<std::pair<int, int>>{{0, 1}};
    const auto matched = solve_efr_matching(inst);
    const auto plain = solve_efr(inst);
    CHECK(matched.value == doctest::Approx(plain.value).epsilon(1e-10));
  }
  SUBCASE("a bridging edge lifts an imbalanced instance") {
    Instance inst(3, 2);
    inst.objective = RewardKind::Throughput;
    inst.demand(0, 1) = 1.0;
    inst.demand(1, 2) = 1.0;
    inst.demand(2, 0) = 0.05;
    inst.set_all_dists(ValueDistribution::uniform(0.0, 1.0));
    inst.matching_edges = std::vector<std::pair<int, int>>{{0, 2}};
    const auto base = solve_efr(inst);
    const auto matched = solve_efr_matching(inst);
    CHECK(matched.value > base.value + 0.5);
  }
}

TEST_CASE("solve_efr_multiobjective") {
  SUBCASE("revenue subject to a throughput floor") {
    Instance inst = two_node(1.0, 1.0, RewardKind::Revenue);
    inst.multi_objective = MultiObjective{RewardKind::Throughput, 1.5};
    const auto sol = solve_efr_multiobjective(inst);
    CHECK(sol.q(0, 1) == doctest::Approx(0.75).epsilon(1e-7));
    CHECK(sol.value == doctest::Approx(0.375).epsilon(1e-6));
    REQUIRE(sol.secondary_value.has_value());
    CHECK(*sol.secondary_value >= 1.5 - 1e-12);
  }
  SUBCASE("vacuous requirement matches the unconstrained solve") {
    Instance inst = two_node(1.0, 1.0, RewardKind::Revenue);
    inst.multi_objective = MultiObjective{RewardKind::Throughput, 0.0};
    const auto constrained = solve_efr_multiobjective(inst);
    Instance plain = inst;
    plain.multi_objective.reset();
    const auto unconstrained = solve_efr(plain);
    CHECK(constrained.value == doctest::Approx(unconstrained.value).epsilon(1e-8));
  }
  SUBCASE("binding corner at the throughput maximum") {
    Instance inst = two_node(1.0, 1.0, RewardKind::Revenue);
    inst.multi_objective = MultiObjective{RewardKind::Throughput, 2.0};
    const auto sol = solve_efr_multiobjective(inst);
    CHECK(sol.q(0, 1) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(sol.value == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("unattainable requirement is infeasible") {
    Instance inst = two_node(1.0, 1.0, RewardKind::Revenue);
    inst.multi_objective = MultiObjective{RewardKind::Throughput, 2.5};
    CHECK_THROWS_AS(solve_efr_multiobjective(inst), InfeasibleError);
  }
  SUBCASE("returned points respect the secondary floor exactly") {
    for (std::uint64_t seed = 200; seed < 212; ++seed) {
      GeneratorOptions opt;
      opt.vary_objective = false;
      Instance inst = random_instance(seed, opt);
      inst.objective = RewardKind::Revenue;
      Instance psi = inst;
      psi.objective = RewardKind::Throughput;
      const double max_psi = solve_efr(psi).value;
      inst.multi_objective = MultiObjective{RewardKind::Throughput, 0.6 * max_psi};
      const auto sol = solve_efr_multiobjective(inst);
      double achieved = 0.0;
      for (int i = 0; i < inst.n; ++i)
        for (int j = 0; j < inst.n; ++j)
          if (inst.has_demand(i, j)) achieved += inst.demand(i, j) * sol.q(i, j);
      CHECK(achieved >= 0.6 * max_psi - 1e-9);
    }
  }
}

TEST_CASE("epsilon_m") {
  CHECK(epsilon_m(3) == doctest::Approx(1.0));  // 2 sqrt(ln 3 / 3) > 1 clamps
  CHECK(epsilon_m(100) == doctest::Approx(0.42919320525786947).epsilon(1e-12));
  CHECK_THROWS_AS(epsilon_m(1), std::domain_error);
  double prev = epsilon_m(8);
  for (long long m = 9; m <= 4000; m += 7) {
    const double cur = epsilon_m(m);
    CHECK(cur <= prev + 1e-15);
    prev = cur;
  }
}

TEST_CASE("solve_efr_rate_limited") {
  SUBCASE("zero travel times leave the relaxation unchanged") {
    Instance inst = two_node(1.0, 1.0);
    inst.m = 4;
    inst.travel_time = Eigen::MatrixXd::Zero(2, 2);
    const auto limited = solve_efr_rate_limited(inst);
    const auto plain = solve_efr(inst);
    CHECK(limited.value == doctest::Approx(plain.value).epsilon(1e-10));
    REQUIRE(limited.scaled_q.has_value());
    CHECK((*limited.scaled_q)(0, 1) ==
          doctest::Approx(limited.q(0, 1) * (1.0 - epsilon_m(4))).epsilon(1e-12));
  }
  SUBCASE("binding transit budget halves the circulation") {
    Instance inst = two_node(1.0, 1.0);
    inst.m = 5;
    inst.travel_time = Eigen::MatrixXd::Constant(2, 2, 5.0);
    const auto sol = solve_efr_rate_limited(inst);
    // q01 + q10 <= 1 with symmetry: value 1
    CHECK(sol.value == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(sol.q(0, 1) + sol.q(1, 0) <= 1.0 + 1e-9);
  }
  SUBCASE("scaling factor at m = 100") {
    Instance inst = two_node(1.0, 1.0);
    inst.m = 100;
    inst.travel_time = Eigen::MatrixXd::Zero(2, 2);
    const auto sol = solve_efr_rate_limited(inst);
    CHECK((*sol.scaled_q)(0, 1) ==
          doctest::Approx(sol.q(0, 1) * (1.0 - 0.42919320525786947)).epsilon(1e-12));
  }
}

TEST_CASE("solve_point_pricing") {
  SUBCASE("symmetric revenue") {
    const auto sol = solve_point_pricing(two_node(1.0, 1.0, RewardKind::Revenue));
    REQUIRE(sol.point_q.has_value());
    CHECK((*sol.point_q)[0] == doctest::Approx(0.5).epsilon(1e-8));
    CHECK((*sol.point_q)[1] == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(sol.value == doctest::Approx(0.5).epsilon(1e-9));
  }
  SUBCASE("throughput pushes the largest quantile to one") {
    const auto sol = solve_point_pricing(two_node(1.0, 1.0));
    CHECK(sol.point_q->maxCoeff() == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("asymmetric rates ride the substitution ray") {
    const auto sol = solve_point_pricing(two_node(2.0, 1.0));
    CHECK((*sol.point_q)[0] == doctest::Approx(0.5).epsilon(1e-8));
    CHECK((*sol.point_q)[1] == doctest::Approx(1.0).epsilon(1e-8));
  }
  SUBCASE("golden section against a grid scan") {
    Instance inst = two_node(1.3, 0.7, RewardKind::Revenue,
                             ValueDistribution::exponential(1.2));
    const auto sol = solve_point_pricing(inst);
    double best = 0.0;
    const Eigen::VectorXd ray = *sol.point_q / sol.point_q->maxCoeff();
    for (int k = 0; k <= 100000; ++k) {
      const double theta = k / 100000.0;
      double value = 0.0;
      for (int i = 0; i < inst.n; ++i)
        for (int j = 0; j < inst.n; ++j)
          if (inst.has_demand(i, j)) {
            value += inst.demand(i, j) * inst.reward(i, j, std::min(1.0, theta * ray[i]));
          }
      best = std::max(best, value);
    }
    CHECK(sol.value == doctest::Approx(best).epsilon(1e-8));
    CHECK(sol.upper_bound >= best - 1e-10);
  }
  SUBCASE("distinct per-origin distributions are rejected") {
    Instance inst(3, 1);
    inst.demand(0, 1) = 1.0;
    inst.demand(0, 2) = 1.0;
    inst.demand(1, 2) = 1.0;
    inst.demand(2, 0) = 1.0;
    inst.set_all_dists(ValueDistribution::uniform(0.0, 1.0));
    inst.set_dist(0, 2, ValueDistribution::exponential(1.0));
    CHECK_THROWS_AS(solve_point_pricing(inst), std::invalid_argument);
  }
}

TEST_CASE("solve_noprice_redirection") {
  SUBCASE("balanced demand needs no redirection") {
    Instance inst = two_node(1.0, 1.0);
    inst.redirect_cost = Eigen::MatrixXd::Constant(2, 2, 0.3);
    const auto sol = solve_noprice_redirection(inst);
    CHECK((*sol.point_q)[0] == doctest::Approx(1.0));
    CHECK((*sol.point_q)[1] == doctest::Approx(1.0));
    CHECK(sol.z->cwiseAbs().maxCoeff() <= 1e-10);
  }
  SUBCASE("one-way dominance pulls units back") {
    Instance inst = two_node(2.0, 0.5);
    Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(2, 2, 0.01);
    cost.diagonal().setZero();
    inst.redirect_cost = cost;
    const auto sol = solve_noprice_redirection(inst);
    CHECK((*sol.z)(1, 0) > 0.1);
  }
  SUBCASE("zero rewards tie-break to all-zeros") {
    // revenue at the floor price of Exponential is zero
    Instance inst = two_node(1.0, 1.0, RewardKind::Revenue, ValueDistribution::exponential(1.0));
    inst.redirect_cost = Eigen::MatrixXd::Constant(2, 2, 0.1);
    const auto sol = solve_noprice_redirection(inst);
    CHECK(sol.value == doctest::Approx(0.0));
    CHECK(sol.point_q->cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(sol.z->cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("solve_noprice_rate_limited") {
  Instance inst = two_node(1.0, 1.0);
  inst.m = 6;
  inst.redirect_cost = Eigen::MatrixXd::Constant(2, 2, 0.2);

  SUBCASE("zero travel times reduce to the unconstrained program") {
    inst.travel_time = Eigen::MatrixXd::Zero(2, 2);
    const auto limited = solve_noprice_rate_limited(inst);
    const auto plain = solve_noprice_redirection(inst);
    CHECK(limited.value == doctest::Approx(plain.value).epsilon(1e-10));
  }
  SUBCASE("slack budget matches, binding budget hurts") {
    inst.travel_time = Eigen::MatrixXd::Constant(2, 2, 1.0);
    const auto slack = solve_noprice_rate_limited(inst);
    const auto plain = solve_noprice_redirection(inst);
    CHECK(slack.value == doctest::Approx(plain.value).epsilon(1e-10));

    inst.travel_time = Eigen::MatrixXd::Constant(2, 2, 12.0);
    const auto binding = solve_noprice_rate_limited(inst);
    CHECK(binding.value < plain.value - 1e-6);
  }
}

TEST_CASE("relax variant naming round-trips") {
  for (RelaxVariant v :
       {RelaxVariant::Efr, RelaxVariant::SupplyRedirection, RelaxVariant::Matching,
        RelaxVariant::MultiObjective, RelaxVariant::RateLimited, RelaxVariant::PointPricing,
        RelaxVariant::NoPrice, RelaxVariant::NoPriceRateLimited}) {
    CHECK(relax_variant_from_string(to_string(v)) == v);
  }
  CHECK_THROWS_AS(relax_variant_from_string("bogus"), std::invalid_argument);
}
