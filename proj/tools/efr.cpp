// Command-line front door: instance I/O, steady-state analytics, relaxation
// solves, policy extraction, simulation, verification checks and batch
// experiments. Exit codes: 0 success, 1 assertion/check failure, 2 input
// error.

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "efr/generator.hpp"
#include "efr/gordon_newell.hpp"
#include "efr/io.hpp"
#include "efr/policy.hpp"
#include "efr/relax.hpp"
#include "efr/sim.hpp"
#include "efr/verify.hpp"

namespace {

using namespace efr;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitInputError = 2;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void emit(const Json& j, const std::string& output) {
  if (output.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    save_json(output, j);
  }
}

struct CsvWriter {
  std::ofstream out;
  explicit CsvWriter(const std::string& path) : out(path) {
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  }
  void row(const std::vector<std::string>& cells) {
    for (size_t k = 0; k < cells.size(); ++k) out << (k ? "," : "") << cells[k];
    out << "\n";
  }
};

Instance default_delay_instance(long long m) {
  Instance inst(2, m);
  inst.objective = RewardKind::Throughput;
  inst.demand(0, 1) = 1.0;
  inst.demand(1, 0) = 1.0;
  inst.set_all_dists(ValueDistribution::exponential(1.0));
  inst.travel_time = (Eigen::MatrixXd(2, 2) << 0.0, 0.2 * m, 0.2 * m, 0.0).finished();
  return inst;
}

// 600-station demo at the scale of a large bike-share fleet: a ring with a
// weaker reverse ring.
Instance city_scale_instance() {
  const int n = 600;
  Instance inst(n, 10000);
  inst.objective = RewardKind::Throughput;
  for (int i = 0; i < n; ++i) {
    inst.demand(i, (i + 1) % n) = 1.0;
    inst.demand((i + 1) % n, i) = 0.5;
  }
  inst.set_all_dists(ValueDistribution::uniform(0.0, 1.0));
  return inst;
}

int cmd_analyze(const std::string& input, const std::string& policy_path,
                const std::string& output, const std::string& format) {
  const Instance inst = load_instance(input);
  const QuantilePolicy policy =
      policy_path.empty() ? QuantilePolicy::uniform(inst.n, 1.0) : load_policy(policy_path, inst.n);
  const SteadyStateSummary summary = inst.infinite_units()
                                         ? infinite_unit_summary(inst, policy)
                                         : steady_state_summary(inst, policy, inst.m);
  if (format == "csv") {
    CsvWriter csv(output.empty() ? "/dev/stdout" : output);
    csv.row({"from", "to", "rate", "quantile", "flow", "availability_from"});
    for (int i = 0; i < inst.n; ++i)
      for (int j = 0; j < inst.n; ++j) {
        if (!inst.has_demand(i, j)) continue;
        csv.row({std::to_string(i), std::to_string(j), fmt17(inst.demand(i, j)),
                 fmt17(policy.q(i, j)), fmt17(summary.flows(i, j)),
                 fmt17(summary.availability[i])});
      }
  } else {
    emit(summary_to_json(summary), output);
  }
  return kExitOk;
}

int cmd_solve(const std::string& input, const std::string& variant_name, int breakpoints,
              double gap, const std::string& output) {
  const Instance inst = load_instance(input);
  SolverConfig config;
  if (breakpoints > 0) config.breakpoints = breakpoints;
  if (gap > 0.0) config.gap_tolerance = gap;
  const RelaxSolution sol = solve_variant(inst, relax_variant_from_string(variant_name), config);
  emit(relax_solution_to_json(sol), output);
  return kExitOk;
}

int cmd_extract_policy(const std::string& input, const std::string& relaxation,
                       const std::string& output, bool apply_grid, double repair_eps) {
  const Instance inst = load_instance(input);
  const RelaxSolution sol = relax_solution_from_json(load_json(relaxation));
  PricePolicy policy = prices_from_relaxation(inst, sol);
  if (repair_eps > 0.0) {
    policy.quantiles.q = connectivity_repair(inst, policy.quantiles.q, repair_eps);
    for (int i = 0; i < inst.n; ++i)
      for (int j = 0; j < inst.n; ++j) {
        policy.prices(i, j) = inst.has_demand(i, j)
                                  ? quantile_to_price(inst.dist(i, j), policy.quantiles.q(i, j))
                                  : std::numeric_limits<double>::infinity();
      }
  }
  Json out = policy_to_json(policy.quantiles);
  Json prices = Json::array();
  for (int i = 0; i < inst.n; ++i) {
    Json row = Json::array();
    for (int j = 0; j < inst.n; ++j) {
      const double p = policy.prices(i, j);
      if (std::isinf(p)) {
        row.push_back(nullptr);
      } else {
        row.push_back(p);
      }
    }
    prices.push_back(std::move(row));
  }
  out["prices"] = std::move(prices);
  out["source_variant"] = to_string(policy.source);
  if (apply_grid) {
    if (!sol.point_q) {
      throw std::invalid_argument("--grid rounding needs a point-pricing solution");
    }
    Eigen::VectorXd point_prices(inst.n);
    for (int i = 0; i < inst.n; ++i) {
      const ValueDistribution* dist = nullptr;
      for (int j = 0; j < inst.n && !dist; ++j)
        if (inst.has_demand(i, j)) dist = &inst.dist(i, j);
      point_prices[i] = quantile_to_price(*dist, (*sol.point_q)[i]);
    }
    const DiscreteGridReport grid = round_to_discrete_grid(inst, point_prices);
    Json g;
    g["solved_prices"] = std::vector<double>(grid.solved_prices.data(),
                                             grid.solved_prices.data() + inst.n);
    g["rounded_prices"] = std::vector<double>(grid.rounded_prices.data(),
                                              grid.rounded_prices.data() + inst.n);
    g["rounded_quantiles"] = std::vector<double>(grid.rounded_quantiles.data(),
                                                 grid.rounded_quantiles.data() + inst.n);
    g["grid_gap_ratio"] = grid.grid_gap_ratio;
    g["coverage_ok"] = grid.coverage_ok;
    out["grid"] = std::move(g);
  }
  emit(out, output);
  return kExitOk;
}

int cmd_simulate(const std::string& input, const std::string& policy_path, std::uint64_t seed,
                 double horizon, int reps, const std::string& output, const std::string& csv) {
  const Instance inst = load_instance(input);
  const QuantilePolicy policy =
      policy_path.empty() ? QuantilePolicy::uniform(inst.n, 1.0) : load_policy(policy_path, inst.n);
  SimConfig config;
  config.seed = seed;
  config.horizon = horizon;
  config.replications = reps;
  const SimResult result = simulate(inst, policy, config);
  emit(sim_result_to_json(result), output);
  if (!csv.empty()) {
    const SteadyStateSummary exact = steady_state_summary(inst, policy, inst.m);
    CsvWriter writer(csv);
    writer.row({"from", "to", "empirical_flow", "halfwidth", "exact_flow"});
    for (int i = 0; i < inst.n; ++i)
      for (int j = 0; j < inst.n; ++j) {
        if (!inst.has_demand(i, j)) continue;
        writer.row({std::to_string(i), std::to_string(j), fmt17(result.flows(i, j)),
                    fmt17(result.flow_halfwidth(i, j)), fmt17(exact.flows(i, j))});
      }
  }
  return kExitOk;
}

Json run_check(const std::string& check, const std::string& input, std::uint64_t seed) {
  Json report;
  report["check"] = check;
  bool pass = true;
  Json details = Json::array();

  if (check == "product-form") {
    for (const auto& pf_case : product_form_suite()) {
      const auto r = check_product_form(pf_case);
      pass &= r.pass;
      details.push_back({{"case", r.name}, {"max_abs_error", r.max_abs_error}, {"pass", r.pass}});
    }
  } else if (check == "biregular") {
    for (int n = 1; n <= 4; ++n) {
      for (long long m = 1; m <= 6; ++m) {
        const auto graph = build_biregular_graph(n, m);
        const double expect = static_cast<double>(m + n - 1) / m;
        double worst = 0.0;
        for (int u = 0; u < graph.upper_sums.size(); ++u)
          worst = std::max(worst, std::abs(graph.upper_sums[u] - 1.0));
        for (int l = 0; l < graph.lower_sums.size(); ++l)
          worst = std::max(worst, std::abs(graph.lower_sums[l] - expect));
        pass &= worst <= 1e-12;
        details.push_back({{"n", n}, {"m", m}, {"worst_sum_error", worst}});
      }
    }
  } else if (check == "monotonicity") {
    for (std::uint64_t s = seed; s < seed + 10; ++s) {
      GeneratorOptions opt;
      opt.with_matching_edges = false;
      opt.with_redirect_cost = false;
      const Instance inst = random_instance(s, opt);
      Eigen::VectorXd q(inst.n), q_prime(inst.n);
      for (int i = 0; i < inst.n; ++i) {
        q[i] = 0.2 + 0.6 * ((s + i) % 7) / 7.0;
        q_prime[i] = std::min(1.0, q[i] + 0.15);
      }
      const auto r = check_flow_monotonicity(inst, q, q_prime);
      pass &= r.ok;
      details.push_back({{"seed", s}, {"worst_violation", r.worst_violation}, {"pass", r.ok}});
    }
  } else if (check == "tail-bound") {
    int violations = 0;
    for (int lambda = 1; lambda <= 50; ++lambda) {
      for (double frac : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const double x = frac * lambda;
        if (poisson_tail_bound(lambda, x) < poisson_tail_exact(lambda, lambda + x) - 1e-15) {
          ++violations;
        }
      }
    }
    pass = violations == 0;
    details.push_back({{"violations", violations}});
  } else if (check == "nonconcavity") {
    for (double eps : {0.5, 0.1, 0.01}) {
      const auto r = nonconcavity_demo(eps);
      pass &= r.matches_formulas && r.midpoint_gap;
      details.push_back({{"epsilon", eps},
                         {"return_times", r.return_time},
                         {"throughputs", r.throughput},
                         {"formula_error", r.formula_error},
                         {"midpoint_gap", r.midpoint_gap}});
    }
  } else if (check == "tightness") {
    double prev = 1.0;
    for (double k : {1.0, 10.0, 100.0, 1000.0}) {
      const auto r = tightness_demo(3, 2, k);
      const bool exact = std::abs(r.relaxation_policy_value - r.guarantee_value) <= 1e-9;
      pass &= exact && r.ratio <= prev + 1e-12;
      prev = r.ratio;
      details.push_back({{"k", k},
                         {"relaxation_policy_value", r.relaxation_policy_value},
                         {"all_ones_value", r.all_ones_value},
                         {"ratio", r.ratio}});
    }
  } else if (check == "certificate") {
    if (!input.empty()) {
      const Instance inst = load_instance(input);
      const auto r = approximation_certificate(inst, RelaxVariant::Efr);
      pass &= r.pass;
      details.push_back(certificate_to_json(r));
    } else {
      for (std::uint64_t s = seed; s < seed + 25; ++s) {
        const Instance inst = random_instance(s);
        for (RelaxVariant variant : {RelaxVariant::Efr, RelaxVariant::SupplyRedirection,
                                     RelaxVariant::Matching, RelaxVariant::PointPricing}) {
          const auto r = approximation_certificate(inst, variant);
          pass &= r.pass;
          details.push_back(certificate_to_json(r));
        }
      }
    }
  } else if (check == "bicriteria") {
    for (std::uint64_t s = seed; s < seed + 20; ++s) {
      GeneratorOptions opt;
      opt.vary_objective = false;
      Instance inst = random_instance(s, opt);
      inst.objective = (s % 2 == 0) ? RewardKind::Revenue : RewardKind::Welfare;
      Instance psi = inst;
      psi.objective = RewardKind::Throughput;
      const double max_psi = solve_efr(psi).value;
      inst.multi_objective =
          MultiObjective{RewardKind::Throughput, (0.3 + 0.06 * (s % 10)) * max_psi};
      const auto r = bicriteria_check(inst);
      pass &= r.primary_pass && r.secondary_pass;
      details.push_back({{"seed", s},
                         {"gamma", r.gamma},
                         {"requirement", r.requirement},
                         {"phi_m", r.phi_m},
                         {"psi_m", r.psi_m},
                         {"primary_pass", r.primary_pass},
                         {"secondary_pass", r.secondary_pass}});
    }
  } else if (check == "delay-bound") {
    const Instance inst = input.empty() ? default_delay_instance(100) : load_instance(input);
    SimConfig config;
    config.seed = seed;
    config.horizon = 2e4;
    config.replications = 5;
    const auto r = delay_bound_check(inst, QuantilePolicy::uniform(inst.n, 1.0), config);
    pass = r.applicable && r.exact_pass && r.sim_pass;
    details.push_back({{"m", r.m},
                       {"load", r.load},
                       {"load_limit", r.load_limit},
                       {"bound", r.bound},
                       {"exact_max_availability", r.exact_max_availability},
                       {"sim_max_availability", r.sim_max_availability},
                       {"sim_halfwidth", r.sim_halfwidth},
                       {"applicable", r.applicable}});
  } else if (check == "city-scale") {
    const auto r = approximation_certificate(city_scale_instance(), RelaxVariant::Efr);
    pass = r.pass;
    details.push_back(certificate_to_json(r));
  } else {
    throw std::invalid_argument("unknown check: " + check);
  }

  report["pass"] = pass;
  report["details"] = std::move(details);
  return report;
}

int run_experiment(const std::string& name, const std::string& csv_path,
                   const std::string& summary_path, std::uint64_t seed, int count) {
  bool pass = true;
  Json summary;
  summary["experiment"] = name;
  CsvWriter csv(csv_path.empty() ? "/dev/stdout" : csv_path);

  if (name == "nonconcavity") {
    csv.row({"epsilon", "return_time_I", "return_time_II", "return_time_III", "throughput_I",
             "throughput_II", "throughput_III", "formula_error", "midpoint_gap", "pass"});
    for (double eps : {0.5, 0.1, 0.01}) {
      const auto r = nonconcavity_demo(eps);
      const bool ok = r.matches_formulas && r.midpoint_gap;
      pass &= ok;
      csv.row({fmt17(eps), fmt17(r.return_time[0]), fmt17(r.return_time[1]),
               fmt17(r.return_time[2]), fmt17(r.throughput[0]), fmt17(r.throughput[1]),
               fmt17(r.throughput[2]), fmt17(r.formula_error), r.midpoint_gap ? "1" : "0",
               ok ? "1" : "0"});
    }
  } else if (name == "tightness") {
    csv.row({"k", "n", "m", "relaxation_policy_value", "guarantee_value", "all_ones_value",
             "ratio", "pass"});
    double prev = 1.0;
    for (double k : {1.0, 10.0, 100.0, 1000.0}) {
      const auto r = tightness_demo(3, 2, k);
      const bool ok = std::abs(r.relaxation_policy_value - r.guarantee_value) <= 1e-9 &&
                      r.ratio <= prev + 1e-12;
      prev = r.ratio;
      pass &= ok;
      csv.row({fmt17(k), "3", "2", fmt17(r.relaxation_policy_value), fmt17(r.guarantee_value),
               fmt17(r.all_ones_value), fmt17(r.ratio), ok ? "1" : "0"});
    }
  } else if (name == "certificate-batch") {
    csv.row({"seed", "variant", "n", "m", "elevated_value", "obj_m", "ratio", "threshold",
             "availability_deviation", "circulation", "repaired", "equality", "pass"});
    for (std::uint64_t s = seed; s < seed + static_cast<std::uint64_t>(count); ++s) {
      const Instance inst = random_instance(s);
      for (RelaxVariant variant : {RelaxVariant::Efr, RelaxVariant::SupplyRedirection,
                                   RelaxVariant::Matching, RelaxVariant::PointPricing}) {
        const auto r = approximation_certificate(inst, variant);
        pass &= r.pass;
        csv.row({std::to_string(s), to_string(variant), std::to_string(r.n),
                 std::to_string(r.m), fmt17(r.elevated_value), fmt17(r.obj_m), fmt17(r.ratio),
                 fmt17(r.threshold), fmt17(r.availability_deviation),
                 r.demand_circulation ? "1" : "0", r.repaired ? "1" : "0",
                 r.equality_pass ? "1" : "0", r.pass ? "1" : "0"});
      }
    }
  } else if (name == "delay-scaling") {
    csv.row({"m", "load", "load_limit", "bound", "exact_max_availability",
             "sim_max_availability", "sim_halfwidth", "exact_pass", "sim_pass"});
    for (long long m : {100, 200, 400, 800}) {
      const Instance inst = default_delay_instance(m);
      SimConfig config;
      config.seed = seed;
      config.horizon = 1e4;
      config.replications = 5;
      const auto r = delay_bound_check(inst, QuantilePolicy::uniform(2, 1.0), config);
      pass &= r.applicable && r.exact_pass && r.sim_pass;
      csv.row({std::to_string(m), fmt17(r.load), fmt17(r.load_limit), fmt17(r.bound),
               fmt17(r.exact_max_availability), fmt17(r.sim_max_availability),
               fmt17(r.sim_halfwidth), r.exact_pass ? "1" : "0", r.sim_pass ? "1" : "0"});
    }
  } else if (name == "discrete-rounding") {
    csv.row({"seed", "station", "solved_price", "rounded_price", "solved_quantile",
             "rounded_quantile", "grid_gap_ratio", "coverage_ok", "monotone"});
    for (std::uint64_t s = seed; s < seed + 10; ++s) {
      GeneratorOptions opt;
      opt.with_matching_edges = false;
      opt.with_redirect_cost = false;
      Instance inst = random_instance(s, opt);
      const auto sol = solve_point_pricing(inst);
      // five-price grids spanning each origin's value distribution
      std::vector<std::vector<double>> grids(inst.n);
      for (int i = 0; i < inst.n; ++i) {
        const ValueDistribution* dist = nullptr;
        for (int j = 0; j < inst.n && !dist; ++j)
          if (inst.has_demand(i, j)) dist = &inst.dist(i, j);
        for (double q : {0.95, 0.7, 0.45, 0.25, 0.1}) {
          grids[i].push_back(quantile_to_price(*dist, q));
        }
      }
      inst.price_grid = std::move(grids);
      Eigen::VectorXd prices(inst.n);
      for (int i = 0; i < inst.n; ++i) {
        const ValueDistribution* dist = nullptr;
        for (int j = 0; j < inst.n && !dist; ++j)
          if (inst.has_demand(i, j)) dist = &inst.dist(i, j);
        prices[i] = quantile_to_price(*dist, std::max(1e-9, (*sol.point_q)[i]));
      }
      const auto report = round_to_discrete_grid(inst, prices);
      for (int i = 0; i < inst.n; ++i) {
        const bool monotone = report.rounded_prices[i] >= report.solved_prices[i] - 1e-12 &&
                              report.rounded_quantiles[i] <= report.solved_quantiles[i] + 1e-12;
        pass &= monotone;
        csv.row({std::to_string(s), std::to_string(i), fmt17(report.solved_prices[i]),
                 fmt17(report.rounded_prices[i]), fmt17(report.solved_quantiles[i]),
                 fmt17(report.rounded_quantiles[i]), fmt17(report.grid_gap_ratio),
                 report.coverage_ok ? "1" : "0", monotone ? "1" : "0"});
      }
    }
  } else {
    throw std::invalid_argument("unknown experiment: " + name);
  }

  summary["pass"] = pass;
  if (!summary_path.empty()) save_json(summary_path, summary);
  std::cerr << "experiment " << name << (pass ? " passed" : " FAILED") << "\n";
  return pass ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Steady-state analytics, flow-relaxation policies and verification for "
               "shared-vehicle queueing models"};
  app.require_subcommand(1);

  std::string input, output, policy_path, format = "json";
  std::uint64_t seed = 0;

  auto* analyze = app.add_subcommand("analyze", "exact steady-state summary of a policy");
  analyze->add_option("--input", input)->required();
  analyze->add_option("--policy", policy_path);
  analyze->add_option("--output", output);
  analyze->add_option("--format", format)->check(CLI::IsMember({"json", "csv"}));

  std::string variant = "efr";
  int breakpoints = 0;
  double gap = 0.0;
  auto* solve = app.add_subcommand("solve", "solve an elevated flow relaxation");
  solve->add_option("--input", input)->required();
  solve->add_option("--variant", variant)
      ->check(CLI::IsMember({"efr", "supply", "matching", "multi", "rate-limited", "point",
                             "noprice", "noprice-rate-limited"}));
  solve->add_option("--breakpoints", breakpoints);
  solve->add_option("--gap", gap);
  solve->add_option("--output", output);

  std::string relaxation;
  bool apply_grid = false;
  double repair_eps = 0.0;
  auto* extract = app.add_subcommand("extract-policy", "turn a relaxation into prices");
  extract->add_option("--input", input)->required();
  extract->add_option("--relaxation", relaxation)->required();
  extract->add_option("--output", output);
  extract->add_flag("--grid", apply_grid, "round point prices to the instance's price grid");
  extract->add_option("--repair", repair_eps, "apply connectivity repair with this epsilon");

  double horizon = 1e4;
  int reps = 10;
  std::string csv;
  auto* simulate_cmd = app.add_subcommand("simulate", "seeded event-driven simulation");
  simulate_cmd->add_option("--input", input)->required();
  simulate_cmd->add_option("--policy", policy_path);
  simulate_cmd->add_option("--seed", seed);
  simulate_cmd->add_option("--horizon", horizon);
  simulate_cmd->add_option("--reps", reps);
  simulate_cmd->add_option("--output", output);
  simulate_cmd->add_option("--csv", csv, "per-edge empirical vs exact flows");

  std::string check;
  auto* verify_cmd = app.add_subcommand("verify", "named verification checks");
  verify_cmd->add_option("--check", check)
      ->required()
      ->check(CLI::IsMember({"product-form", "biregular", "monotonicity", "tail-bound",
                             "nonconcavity", "tightness", "certificate", "bicriteria",
                             "delay-bound", "city-scale"}));
  verify_cmd->add_option("--input", input);
  verify_cmd->add_option("--seed", seed);
  verify_cmd->add_option("--output", output);

  std::string experiment_name, summary_path;
  int count = 100;
  auto* experiment = app.add_subcommand("experiment", "batch experiments with CSV output");
  experiment->add_option("--name", experiment_name)
      ->required()
      ->check(CLI::IsMember({"nonconcavity", "tightness", "certificate-batch", "delay-scaling",
                             "discrete-rounding"}));
  experiment->add_option("--output", output);
  experiment->add_option("--summary", summary_path);
  experiment->add_option("--seed", seed);
  experiment->add_option("--count", count);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze) return cmd_analyze(input, policy_path, output, format);
    if (*solve) return cmd_solve(input, variant, breakpoints, gap, output);
    if (*extract) return cmd_extract_policy(input, relaxation, output, apply_grid, repair_eps);
    if (*simulate_cmd) return cmd_simulate(input, policy_path, seed, horizon, reps, output, csv);
    if (*verify_cmd) {
      const Json report = run_check(check, input, seed);
      emit(report, output);
      return report["pass"].get<bool>() ? kExitOk : kExitCheckFailed;
    }
    if (*experiment) return run_experiment(experiment_name, output, summary_path, seed, count);
  } catch (const ValidationError& err) {
    std::cerr << "input error: " << err.what() << "\n";
    return kExitInputError;
  } catch (const std::invalid_argument& err) {
    std::cerr << "input error: " << err.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitCheckFailed;
  }
  return kExitOk;
}
