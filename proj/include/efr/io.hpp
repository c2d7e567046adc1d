#pragma once

#include <string>

#include <json.hpp>

#include "efr/gordon_newell.hpp"
#include "efr/model.hpp"
#include "efr/relax.hpp"
#include "efr/sim.hpp"
#include "efr/verify.hpp"

namespace efr {

using Json = nlohmann::json;

/// Reads an instance from the documented JSON schema. Schema violations
/// throw ValidationError with JSON-pointer style paths; the parsed instance
/// is additionally run through validate_instance.
Instance load_instance(const std::string& path);
Instance instance_from_json(const Json& j);

Json instance_to_json(const Instance& instance);
void save_instance(const std::string& path, const Instance& instance);

QuantilePolicy policy_from_json(const Json& j, int n);
QuantilePolicy load_policy(const std::string& path, int n);
Json policy_to_json(const QuantilePolicy& policy);

Json summary_to_json(const SteadyStateSummary& summary);
Json relax_solution_to_json(const RelaxSolution& solution);
RelaxSolution relax_solution_from_json(const Json& j);
Json sim_result_to_json(const SimResult& result);
Json certificate_to_json(const CertificateReport& report);

void save_json(const std::string& path, const Json& j);
Json load_json(const std::string& path);

}  // namespace efr
