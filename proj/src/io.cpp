#include "efr/io.hpp"

#include <fstream>

namespace efr {

namespace {

Eigen::MatrixXd matrix_from_json(const Json& j, int n, const std::string& path) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    throw ValidationError(std::vector<Diagnostic>{{path, "expected an n x n array"}});
  }
  Eigen::MatrixXd out(n, n);
  for (int i = 0; i < n; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != n) {
      throw ValidationError(std::vector<Diagnostic>{{path + "/" + std::to_string(i), "expected a row of n numbers"}});
    }
    for (int k = 0; k < n; ++k) {
      if (!j[i][k].is_number()) {
        throw ValidationError(
            {{path + "/" + std::to_string(i) + "/" + std::to_string(k), "expected a number"}});
      }
      out(i, k) = j[i][k].get<double>();
    }
  }
  return out;
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

ValueDistribution dist_from_json(const Json& j, const std::string& path,
                                 std::vector<Diagnostic>& diags) {
  const std::string family = j.value("family", "");
  const Json params = j.value("params", Json::object());
  try {
    if (family == "exponential") {
      if (!params.contains("rate")) {
        diags.push_back({path + "/params/rate", "missing exponential rate"});
        return {};
      }
      return ValueDistribution::exponential(params["rate"].get<double>());
    }
    if (family == "uniform") {
      if (!params.contains("a") || !params.contains("b")) {
        diags.push_back({path + "/params", "uniform needs bounds a and b"});
        return {};
      }
      return ValueDistribution::uniform(params["a"].get<double>(), params["b"].get<double>());
    }
  } catch (const std::invalid_argument& err) {
    diags.push_back({path + "/params", err.what()});
    return {};
  }
  diags.push_back({path + "/family", "unsupported family '" + family + "'"});
  return {};
}

Json dist_to_json(const ValueDistribution& d) {
  if (d.family() == ValueDistribution::Family::Exponential) {
    return Json{{"family", "exponential"}, {"params", {{"rate", d.rate()}}}};
  }
  return Json{{"family", "uniform"}, {"params", {{"a", d.uniform_a()}, {"b", d.uniform_b()}}}};
}

}  // namespace

Instance instance_from_json(const Json& j) {
  std::vector<Diagnostic> diags;
  if (!j.contains("n") || !j["n"].is_number_integer()) {
    throw ValidationError(std::vector<Diagnostic>{{"/n", "station count must be an integer"}});
  }
  const int n = j["n"].get<int>();
  if (n < 1) throw ValidationError(std::vector<Diagnostic>{{"/n", "station count must be positive"}});

  long long m = 0;
  if (!j.contains("m")) {
    diags.push_back({"/m", "missing unit count (integer or \"inf\")"});
  } else if (j["m"].is_string()) {
    if (j["m"].get<std::string>() == "inf") {
      m = Instance::kInfiniteUnits;
    } else {
      diags.push_back({"/m", "unit count string must be \"inf\""});
    }
  } else if (j["m"].is_number_integer()) {
    m = j["m"].get<long long>();
  } else {
    diags.push_back({"/m", "unit count must be an integer or \"inf\""});
  }

  Instance inst(n, m);
  if (j.contains("objective")) {
    try {
      inst.objective = reward_kind_from_string(j["objective"].get<std::string>());
    } catch (const std::exception& err) {
      diags.push_back({"/objective", err.what()});
    }
  }

  if (!j.contains("demand") || !j["demand"].is_array()) {
    diags.push_back({"/demand", "missing demand list"});
  } else {
    int k = 0;
    for (const auto& entry : j["demand"]) {
      const std::string path = "/demand/" + std::to_string(k);
      const int from = entry.value("from", -1);
      const int to = entry.value("to", -1);
      if (from < 0 || from >= n) diags.push_back({path + "/from", "station index out of range"});
      if (to < 0 || to >= n) diags.push_back({path + "/to", "station index out of range"});
      if (!entry.contains("rate") || !entry["rate"].is_number()) {
        diags.push_back({path + "/rate", "missing arrival rate"});
      } else if (from >= 0 && from < n && to >= 0 && to < n) {
        const double rate = entry["rate"].get<double>();
        if (!(rate >= 0.0) || !std::isfinite(rate)) {
          diags.push_back({path + "/rate", "arrival rate must be finite and nonnegative"});
        } else {
          inst.demand(from, to) = rate;
          if (rate > 0.0) {
            if (!entry.contains("dist")) {
              diags.push_back({path + "/dist", "demand edge needs a value distribution"});
            } else {
              inst.set_dist(from, to, dist_from_json(entry["dist"], path + "/dist", diags));
            }
          }
        }
      }
      ++k;
    }
  }

  auto sparse_matrix = [&](const char* key, const char* field) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    int k = 0;
    for (const auto& entry : j[key]) {
      const std::string path = "/" + std::string(key) + "/" + std::to_string(k);
      const int from = entry.value("from", -1);
      const int to = entry.value("to", -1);
      if (from < 0 || from >= n || to < 0 || to >= n) {
        diags.push_back({path, "station index out of range"});
      } else if (!entry.contains(field) || !entry[field].is_number()) {
        diags.push_back({path + "/" + field, "missing value"});
      } else {
        out(from, to) = entry[field].get<double>();
      }
      ++k;
    }
    return out;
  };
  if (j.contains("travel_time")) inst.travel_time = sparse_matrix("travel_time", "mean");
  if (j.contains("redirect_cost")) inst.redirect_cost = sparse_matrix("redirect_cost", "cost");

  if (j.contains("matching_edges")) {
    std::vector<std::pair<int, int>> edges;
    int k = 0;
    for (const auto& entry : j["matching_edges"]) {
      if (!entry.is_array() || entry.size() != 2) {
        diags.push_back({"/matching_edges/" + std::to_string(k), "expected a pair [i, j]"});
      } else {
        edges.emplace_back(entry[0].get<int>(), entry[1].get<int>());
      }
      ++k;
    }
    inst.matching_edges = std::move(edges);
  }
  if (j.contains("price_grid")) {
    std::vector<std::vector<double>> grid(n);
    int k = 0;
    for (const auto& entry : j["price_grid"]) {
      const std::string path = "/price_grid/" + std::to_string(k);
      const int station = entry.value("station", -1);
      if (station < 0 || station >= n) {
        diags.push_back({path + "/station", "station index out of range"});
      } else if (!entry.contains("prices") || !entry["prices"].is_array()) {
        diags.push_back({path + "/prices", "missing price list"});
      } else {
        for (const auto& p : entry["prices"]) grid[station].push_back(p.get<double>());
      }
      ++k;
    }
    inst.price_grid = std::move(grid);
  }
  if (j.contains("multi_objective")) {
    const auto& mo = j["multi_objective"];
    MultiObjective multi;
    try {
      multi.kind = reward_kind_from_string(mo.value("kind", ""));
    } catch (const std::exception& err) {
      diags.push_back({"/multi_objective/kind", err.what()});
    }
    multi.requirement = mo.value("requirement", 0.0);
    inst.multi_objective = multi;
  }

  if (!diags.empty()) throw ValidationError(std::move(diags));
  auto post = validate_instance(inst);
  if (!post.empty()) throw ValidationError(std::move(post));
  return inst;
}

Instance load_instance(const std::string& path) {
  return instance_from_json(load_json(path));
}

Json instance_to_json(const Instance& inst) {
  Json j;
  j["n"] = inst.n;
  if (inst.infinite_units()) {
    j["m"] = "inf";
  } else {
    j["m"] = inst.m;
  }
  j["objective"] = to_string(inst.objective);
  Json demand = Json::array();
  for (int i = 0; i < inst.n; ++i)
    for (int k = 0; k < inst.n; ++k) {
      if (!inst.has_demand(i, k)) continue;
      demand.push_back(Json{{"from", i},
                            {"to", k},
                            {"rate", inst.demand(i, k)},
                            {"dist", dist_to_json(inst.dist(i, k))}});
    }
  j["demand"] = std::move(demand);
  if (inst.travel_time) {
    Json entries = Json::array();
    for (int i = 0; i < inst.n; ++i)
      for (int k = 0; k < inst.n; ++k)
        if ((*inst.travel_time)(i, k) > 0.0) {
          entries.push_back(Json{{"from", i}, {"to", k}, {"mean", (*inst.travel_time)(i, k)}});
        }
    j["travel_time"] = std::move(entries);
  }
  if (inst.redirect_cost) {
    Json entries = Json::array();
    for (int i = 0; i < inst.n; ++i)
      for (int k = 0; k < inst.n; ++k)
        if ((*inst.redirect_cost)(i, k) > 0.0) {
          entries.push_back(Json{{"from", i}, {"to", k}, {"cost", (*inst.redirect_cost)(i, k)}});
        }
    j["redirect_cost"] = std::move(entries);
  }
  if (inst.matching_edges) {
    Json edges = Json::array();
    for (const auto& [a, b] : *inst.matching_edges) edges.push_back(Json::array({a, b}));
    j["matching_edges"] = std::move(edges);
  }
  if (inst.price_grid) {
    Json grid = Json::array();
    for (int i = 0; i < inst.n; ++i) {
      grid.push_back(Json{{"station", i}, {"prices", (*inst.price_grid)[i]}});
    }
    j["price_grid"] = std::move(grid);
  }
  if (inst.multi_objective) {
    j["multi_objective"] = Json{{"kind", to_string(inst.multi_objective->kind)},
                                {"requirement", inst.multi_objective->requirement}};
  }
  return j;
}

void save_instance(const std::string& path, const Instance& inst) {
  save_json(path, instance_to_json(inst));
}

QuantilePolicy policy_from_json(const Json& j, int n) {
  QuantilePolicy policy;
  if (j.contains("point_q")) {
    Eigen::VectorXd point(n);
    if (static_cast<int>(j["point_q"].size()) != n) {
      throw ValidationError(std::vector<Diagnostic>{{"/point_q", "expected one quantile per station"}});
    }
    for (int i = 0; i < n; ++i) point[i] = j["point_q"][i].get<double>();
    policy = QuantilePolicy::from_point(point);
  } else if (j.contains("q")) {
    policy.q = matrix_from_json(j["q"], n, "/q");
  } else {
    throw ValidationError(std::vector<Diagnostic>{{"/", "policy needs either q or point_q"}});
  }
  if (j.contains("redirect")) policy.redirect = matrix_from_json(j["redirect"], n, "/redirect");
  if (j.contains("matching")) policy.matching = matrix_from_json(j["matching"], n, "/matching");
  return policy;
}

QuantilePolicy load_policy(const std::string& path, int n) {
  return policy_from_json(load_json(path), n);
}

Json policy_to_json(const QuantilePolicy& policy) {
  Json j;
  j["q"] = matrix_to_json(policy.q);
  if (policy.redirect) j["redirect"] = matrix_to_json(*policy.redirect);
  if (policy.matching) j["matching"] = matrix_to_json(*policy.matching);
  return j;
}

Json summary_to_json(const SteadyStateSummary& summary) {
  Json j;
  j["m"] = summary.m;
  j["w"] = vector_to_json(summary.w);
  j["mu"] = vector_to_json(summary.mu);
  j["r"] = vector_to_json(summary.r);
  j["G_ratio"] = summary.g_ratio;
  j["availabilities"] = vector_to_json(summary.availability);
  j["flows"] = matrix_to_json(summary.flows);
  j["redirect_flows"] = matrix_to_json(summary.redirect_flows);
  j["obj_m"] = summary.obj;
  j["obj_inf"] = summary.obj_inf;
  j["elevated"] = summary.elevated;
  return j;
}

Json relax_solution_to_json(const RelaxSolution& sol) {
  Json j;
  j["variant"] = to_string(sol.variant);
  j["q"] = matrix_to_json(sol.q);
  if (sol.z) j["z"] = matrix_to_json(*sol.z);
  if (sol.point_q) j["point_q"] = vector_to_json(*sol.point_q);
  if (sol.scaled_q) j["scaled_q"] = matrix_to_json(*sol.scaled_q);
  j["value"] = sol.value;
  j["upper_bound"] = sol.upper_bound;
  j["gap"] = sol.gap;
  j["gap_within_tolerance"] = sol.gap_within_tolerance;
  if (sol.secondary_value) j["secondary_value"] = *sol.secondary_value;
  j["iterations"] = sol.iterations;
  j["breakpoints_used"] = sol.breakpoints_used;
  return j;
}

RelaxSolution relax_solution_from_json(const Json& j) {
  RelaxSolution sol;
  sol.variant = relax_variant_from_string(j.at("variant").get<std::string>());
  const int n = static_cast<int>(j.at("q").size());
  sol.q = matrix_from_json(j.at("q"), n, "/q");
  if (j.contains("z")) sol.z = matrix_from_json(j["z"], n, "/z");
  if (j.contains("point_q")) {
    Eigen::VectorXd point(n);
    for (int i = 0; i < n; ++i) point[i] = j["point_q"][i].get<double>();
    sol.point_q = std::move(point);
  }
  if (j.contains("scaled_q")) sol.scaled_q = matrix_from_json(j["scaled_q"], n, "/scaled_q");
  sol.value = j.value("value", 0.0);
  sol.upper_bound = j.value("upper_bound", 0.0);
  sol.gap = j.value("gap", 0.0);
  sol.gap_within_tolerance = j.value("gap_within_tolerance", true);
  if (j.contains("secondary_value")) sol.secondary_value = j["secondary_value"].get<double>();
  sol.iterations = j.value("iterations", 0);
  sol.breakpoints_used = j.value("breakpoints_used", 0);
  return sol;
}

Json sim_result_to_json(const SimResult& result) {
  Json j;
  j["flows"] = matrix_to_json(result.flows);
  j["flow_halfwidth"] = matrix_to_json(result.flow_halfwidth);
  j["availabilities"] = vector_to_json(result.availability);
  j["availability_halfwidth"] = vector_to_json(result.availability_halfwidth);
  j["redirect_flows"] = matrix_to_json(result.redirect_flows);
  j["objective"] = result.objective;
  j["objective_halfwidth"] = result.objective_halfwidth;
  j["events"] = result.events;
  return j;
}

Json certificate_to_json(const CertificateReport& report) {
  Json j;
  j["variant"] = to_string(report.variant);
  j["m"] = report.m;
  j["n"] = report.n;
  j["relaxation_value"] = report.relaxation_value;
  j["relaxation_upper"] = report.relaxation_upper;
  j["elevated_value"] = report.elevated_value;
  j["obj_m"] = report.obj_m;
  j["ratio"] = report.ratio;
  j["threshold"] = report.threshold;
  j["approximation_ratio"] = report.approximation_ratio;
  j["availability_deviation"] = report.availability_deviation;
  j["demand_circulation"] = report.demand_circulation;
  j["repaired"] = report.repaired;
  j["pass"] = report.pass;
  j["equality_pass"] = report.equality_pass;
  return j;
}

void save_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& err) {
    throw ValidationError(std::vector<Diagnostic>{{path, err.what()}});
  }
  return j;
}

}  // namespace efr
