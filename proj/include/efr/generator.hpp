#pragma once

#include <cstdint>

#include "efr/model.hpp"

namespace efr {

/// Knobs for the seeded random instance generator used by batch experiments:
/// arrival rates uniform on [0.1, 2] over a random strongly connected
/// support (a random Hamiltonian cycle plus extra edges), distributions from
/// the two supported families.
struct GeneratorOptions {
  int min_n = 2;
  int max_n = 4;
  long long min_m = 1;
  long long max_m = 6;
  double extra_edge_prob = 0.5;
  bool per_origin_dists = true;  // identical distributions per origin row
  bool with_redirect_cost = true;
  bool with_matching_edges = true;
  bool vary_objective = true;  // cycle through the three reward kinds
};

Instance random_instance(std::uint64_t seed, const GeneratorOptions& options = {});

/// Random state-independent quantiles on the instance's demand support.
QuantilePolicy random_policy(std::uint64_t seed, const Instance& instance);

}  // namespace efr
