#include <doctest.h>

#include <cmath>

#include "efr/generator.hpp"
#include "efr/states.hpp"
#include "efr/verify.hpp"
#include "oracles.hpp"
#include "rng_util.hpp"

using namespace efr;

namespace {

Instance two_node(double phi12, double phi21, long long m) {
  Instance inst(2, m);
  inst.demand(0, 1) = phi12;
  inst.demand(1, 0) = phi21;
  inst.set_all_dists(ValueDistribution::uniform(0.0, 1.0));
  return inst;
}

}  // namespace

TEST_CASE("brute_force_stationary") {
  SUBCASE("two-state balance") {
    // departures at rate 2 from node 0 and rate 1 from node 1: pi = (1/3, 2/3)
    const Instance inst = two_node(2.0, 1.0, 1);
    const auto dist = brute_force_stationary(inst, QuantilePolicy::uniform(2, 1.0), 1);
    CHECK(dist.probability[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(dist.probability[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("circulation is uniform over six states") {
    Instance inst(3, 2);
    inst.demand(0, 1) = 1.0;
    inst.demand(1, 2) = 1.0;
    inst.demand(2, 0) = 1.0;
    inst.set_all_dists(ValueDistribution::uniform(0.0, 1.0));
    const auto dist = brute_force_stationary(inst, QuantilePolicy::uniform(3, 1.0), 2);
    REQUIRE(dist.states.size() == 6);
    for (int s = 0; s < 6; ++s) {
      CHECK(dist.probability[s] == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    }
  }
  SUBCASE("size cap") {
    const Instance inst = two_node(1.0, 1.0, 1);
    CHECK_THROWS_AS(brute_force_stationary(inst, QuantilePolicy::uniform(2, 1.0), 10000, 100),
                    SizeCapError);
  }
}

TEST_CASE("state_dependent_objective") {
  const Instance inst = two_node(1.0, 1.0, 1);
  SUBCASE("state-independent policies agree with the product form") {
    StateQuantiles policy;
    policy.q.assign(2, QuantilePolicy::uniform(2, 0.8).q);
    const double brute = state_dependent_objective(inst, policy, 1);
    const double exact = steady_state_summary(inst, QuantilePolicy::uniform(2, 0.8), 1).obj;
    CHECK(brute == doctest::Approx(exact).epsilon(1e-12));
  }
  SUBCASE("absorbing state is reported reducible") {
    StateQuantiles policy;
    policy.q.assign(2, QuantilePolicy::uniform(2, 1.0).q);
    policy.q[0] = Eigen::MatrixXd::Zero(2, 2);  // no departures from (1,0)
    CHECK_THROWS_AS(state_dependent_objective(inst, policy, 1), ReducibleError);
  }
}

TEST_CASE("brute_force_state_dependent_opt") {
  SUBCASE("two-node throughput certifies q = 1") {
    const Instance inst = two_node(1.0, 1.0, 1);
    const auto result = brute_force_state_dependent_opt(inst, 1, {0.0, 0.5, 1.0});
    CHECK(result.certified);
    CHECK(result.objective == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("dominates the best state-independent assignment on the grid") {
    const Instance inst = two_node(2.0, 1.0, 1);
    const std::vector<double> grid{0.0, 0.5, 1.0};
    const auto result = brute_force_state_dependent_opt(inst, 1, grid);
    double best_independent = 0.0;
    for (double q01 : grid)
      for (double q10 : grid) {
        QuantilePolicy policy = QuantilePolicy::uniform(2, 1.0);
        policy.q(0, 1) = q01;
        policy.q(1, 0) = q10;
        try {
          best_independent =
              std::max(best_independent, steady_state_summary(inst, policy, 1).obj);
        } catch (const DeadNodeError&) {
        }
      }
    CHECK(result.objective >= best_independent - 1e-12);
  }
  SUBCASE("hub instance: the grid closure contains the third network") {
    const double eps = 0.1;
    Instance inst(3, 1);
    inst.objective = RewardKind::Throughput;
    inst.demand(0, 1) = 1.0;
    inst.demand(1, 0) = 1.0;
    inst.demand(1, 2) = 1.0;
    inst.demand(2, 1) = eps;
    inst.set_all_dists(ValueDistribution::uniform(0.0, 1.0));
    QuantilePolicy network3 = QuantilePolicy::uniform(3, 1.0);
    network3.q(1, 2) = eps;
    const double network3_value = steady_state_summary(inst, network3, 1).obj;
    const auto result = brute_force_state_dependent_opt(inst, 1, {0.0, eps, 0.55, 1.0});
    CHECK(result.certified);
    CHECK(result.objective >= network3_value - 1e-12);
  }
  SUBCASE("heuristic mode stays labeled") {
    const Instance inst = two_node(1.0, 1.0, 3);
    const auto result = brute_force_state_dependent_opt(inst, 3, {0.0, 0.5, 1.0}, 2000);
    CHECK_FALSE(result.certified);
    CHECK(result.objective > 0.0);
  }
}

TEST_CASE("build_biregular_graph") {
  SUBCASE("n = 2, m = 3 weights") {
    const auto graph = build_biregular_graph(2, 3);
    // locate state (2,1): colex order over S_{2,3} = (3,0),(2,1),(1,2),(0,3)
    REQUIRE(graph.upper_states.size() == 4);
    CHECK(graph.upper_states[1] == std::vector<int>{2, 1});
    double w_to_11 = 0.0, w_to_20 = 0.0;
    for (const auto& e : graph.edges) {
      if (e.upper != 1) continue;
      if (graph.lower_states[e.lower] == std::vector<int>{1, 1}) w_to_11 = e.weight;
      if (graph.lower_states[e.lower] == std::vector<int>{2, 0}) w_to_20 = e.weight;
    }
    CHECK(w_to_11 == doctest::Approx(2.0 / 3.0));  // removes one of the two units
    CHECK(w_to_20 == doctest::Approx(1.0 / 3.0));
    for (int u = 0; u < graph.upper_sums.size(); ++u) {
      CHECK(std::abs(graph.upper_sums[u] - 1.0) <= 1e-12);
    }
    for (int l = 0; l < graph.lower_sums.size(); ++l) {
      CHECK(std::abs(graph.lower_sums[l] - 4.0 / 3.0) <= 1e-12);
    }
  }
  SUBCASE("single station") {
    const auto graph = build_biregular_graph(1, 5);
    REQUIRE(graph.edges.size() == 1);
    CHECK(graph.edges[0].weight == doctest::Approx(1.0));
    CHECK(graph.lower_sums[0] == doctest::Approx(1.0));
  }
  SUBCASE("full sweep n <= 4, m <= 6") {
    for (int n = 1; n <= 4; ++n) {
      for (long long m = 1; m <= 6; ++m) {
        const auto graph = build_biregular_graph(n, m);
        const double lower_expected = static_cast<double>(m + n - 1) / m;
        for (int u = 0; u < graph.upper_sums.size(); ++u) {
          CHECK(std::abs(graph.upper_sums[u] - 1.0) <= 1e-12);
        }
        for (int l = 0; l < graph.lower_sums.size(); ++l) {
          CHECK(std::abs(graph.lower_sums[l] - lower_expected) <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("check_flow_monotonicity") {
  SUBCASE("componentwise increase never hurts any edge") {
    const Instance inst = two_node(1.0, 1.0, 2);
    Eigen::VectorXd q(2), q_prime(2);
    q << 0.5, 0.5;
    q_prime << 1.0, 1.0;
    const auto report = check_flow_monotonicity(inst, q, q_prime);
    CHECK(report.ok);
  }
  SUBCASE("equal inputs are exactly flat") {
    const Instance inst = two_node(1.0, 2.0, 3);
    Eigen::VectorXd q(2);
    q << 0.4, 0.8;
    const auto report = check_flow_monotonicity(inst, q, q);
    CHECK(report.ok);
    CHECK(report.worst_violation == doctest::Approx(0.0));
  }
  SUBCASE("single-coordinate raises on random instances") {
    for (std::uint64_t seed = 40; seed < 50; ++seed) {
      GeneratorOptions opt;
      opt.with_matching_edges = false;
      opt.with_redirect_cost = false;
      const Instance inst = random_instance(seed, opt);
      detail::Rng rng(seed);
      Eigen::VectorXd q(inst.n);
      for (int i = 0; i < inst.n; ++i) q[i] = rng.uniform(0.2, 0.9);
      Eigen::VectorXd q_prime = q;
      const int coord = rng.uniform_int(0, inst.n - 1);
      q_prime[coord] = std::min(1.0, q[coord] + rng.uniform(0.05, 0.1));
      const auto report = check_flow_monotonicity(inst, q, q_prime);
      CHECK(report.ok);
    }
  }
  SUBCASE("dominance is required") {
    const Instance inst = two_node(1.0, 1.0, 2);
    Eigen::VectorXd q(2), q_prime(2);
    q << 0.5, 0.5;
    q_prime << 0.4, 1.0;
    CHECK_THROWS_AS(check_flow_monotonicity(inst, q, q_prime), std::invalid_argument);
  }
}

TEST_CASE("poisson_tail_bound") {
  CHECK(poisson_tail_bound(10.0, 0.0) == doctest::Approx(1.0));
  CHECK(poisson_tail_bound(10.0, 5.0) == doctest::Approx(std::exp(-0.625)));
  CHECK_THROWS_AS(poisson_tail_bound(10.0, 11.0), std::domain_error);
  CHECK_THROWS_AS(poisson_tail_bound(10.0, -1.0), std::domain_error);

  SUBCASE("exact tail at lambda = 10, x = 5") {
    const double exact = poisson_tail_exact(10.0, 15.0);
    CHECK(exact == doctest::Approx(oracle::poisson_tail(10.0, 15.0)).epsilon(1e-12));
    CHECK(exact == doctest::Approx(0.0487).epsilon(1e-2));
    CHECK(exact <= poisson_tail_bound(10.0, 5.0));
  }
  SUBCASE("bound dominates the exact tail on the whole grid") {
    for (int lambda = 1; lambda <= 50; ++lambda) {
      for (double frac : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const double x = frac * lambda;
        const double bound = poisson_tail_bound(lambda, x);
        const double exact = poisson_tail_exact(lambda, lambda + x);
        CHECK(bound >= exact - 1e-15);
      }
    }
  }
}

TEST_CASE("nonconcavity_demo") {
  SUBCASE("closed forms at eps = 0.1") {
    const auto report = nonconcavity_demo(0.1);
    CHECK(report.matches_formulas);
    CHECK(report.return_time[0] == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(report.return_time[1] == doctest::Approx(1.5 / 0.31).epsilon(1e-12));
    CHECK(report.return_time[2] == doctest::Approx(3.0 / 1.1).epsilon(1e-12));
    CHECK(report.throughput[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    CHECK(report.throughput[1] == doctest::Approx(0.41333333333).epsilon(1e-9));
    CHECK(report.throughput[2] == doctest::Approx(0.73333333333).epsilon(1e-9));
    CHECK(report.midpoint_gap);
    // product-form cross-check agrees with first-passage analysis
    for (int k = 0; k < 3; ++k) {
      CHECK(report.throughput_product_form[k] ==
            doctest::Approx(report.throughput[k]).epsilon(1e-10));
    }
  }
  SUBCASE("vanishing eps separates the scales") {
    const auto report = nonconcavity_demo(1e-4);
    CHECK(report.matches_formulas);
    CHECK(report.throughput[0] < 1e-3);
    CHECK(report.throughput[1] < 1e-3);
    CHECK(report.throughput[2] == doctest::Approx(2.0 * (1.0 + 1e-4) / 3.0).epsilon(1e-9));
  }
}

TEST_CASE("tightness_demo") {
  SUBCASE("guarantee value is exact") {
    const auto report = tightness_demo(3, 2, 7.0);
    CHECK(report.relaxation_policy_value == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(report.guarantee_value == doctest::Approx(1.5));
  }
  SUBCASE("all-ones approaches n as k grows") {
    const auto report = tightness_demo(3, 2, 1000.0);
    CHECK(report.all_ones_value >= 2.85);
    CHECK(report.ratio > 0.5);
  }
  SUBCASE("ratio decreases in k toward the guarantee") {
    double prev = 1.0;
    for (double k : {1.0, 10.0, 100.0, 1000.0}) {
      const auto report = tightness_demo(3, 2, k);
      CHECK(report.ratio <= prev + 1e-12);
      CHECK(report.ratio > 0.5);
      prev = report.ratio;
    }
  }
}

TEST_CASE("approximation_certificate") {
  SUBCASE("two-node symmetric throughput") {
    const Instance inst = two_node(1.0, 1.0, 1);
    const auto report = approximation_certificate(inst, RelaxVariant::Efr);
    CHECK(report.elevated_value == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(report.obj_m == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(report.ratio == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(report.threshold == doctest::Approx(0.5));
    CHECK(report.pass);
    CHECK(report.equality_pass);
  }
  SUBCASE("upper bound dominates a certified grid search") {
    for (std::uint64_t seed = 60; seed < 66; ++seed) {
      GeneratorOptions opt;
      opt.max_n = 3;
      opt.min_m = 1;
      opt.max_m = 1;
      const Instance inst = random_instance(seed, opt);
      const auto report = approximation_certificate(inst, RelaxVariant::Efr);
      const auto grid = brute_force_state_dependent_opt(inst, 1, {0.0, 0.25, 0.5, 0.75, 1.0});
      REQUIRE(grid.certified);
      CHECK(report.obj_m >= report.threshold * grid.objective - 1e-9);
      // the certified relaxation bound dominates any state-dependent value
      CHECK(report.relaxation_upper >= grid.objective - 1e-9);
    }
  }
}

TEST_CASE("sandwich: relaxation dominates sampled state-dependent policies") {
  int checked = 0;
  for (std::uint64_t seed = 1000; seed < 1200; ++seed) {
    GeneratorOptions opt;
    opt.max_n = 3;
    opt.max_m = 3;
    opt.with_matching_edges = false;
    opt.with_redirect_cost = false;
    const Instance inst = random_instance(seed, opt);
    const auto sol = solve_efr(inst);
    const auto states = enumerate_states(inst.n, inst.m, 1000);
    detail::Rng rng(seed * 17 + 1);
    for (int trial = 0; trial < 3; ++trial) {
      StateQuantiles policy;
      policy.q.assign(states.size(), Eigen::MatrixXd::Zero(inst.n, inst.n));
      for (size_t s = 0; s < states.size(); ++s) {
        for (int i = 0; i < inst.n; ++i)
          for (int j = 0; j < inst.n; ++j)
            if (inst.has_demand(i, j) && states[s][i] > 0) {
              policy.q[s](i, j) = rng.uniform(0.05, 1.0);
            }
      }
      try {
        const double value = state_dependent_objective(inst, policy, inst.m);
        CHECK(sol.value >= value - 1e-8);
        ++checked;
      } catch (const ReducibleError&) {
      }
    }
  }
  CHECK(checked >= 400);
}

TEST_CASE("product-form suite agrees with the generator oracle") {
  const auto suite = product_form_suite();
  CHECK(suite.size() >= 30);
  for (const auto& pf_case : suite) {
    const auto report = check_product_form(pf_case);
    INFO(pf_case.name, " error ", report.max_abs_error);
    CHECK(report.pass);
  }
}
