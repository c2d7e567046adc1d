#pragma once

#include <map>
#include <vector>

#include "efr/errors.hpp"

namespace efr {

/// Number of states |S_{q,m}| = C(m+q-1, q-1) for q queues and m units.
/// Throws SizeCapError when the count exceeds `cap`.
long long state_space_size(int queues, long long m, long long cap);

/// Enumerates S_{q,m} = {x in N_0^q : sum x = m} in colexicographic order
/// (states compare by the last coordinate first). This fixed order makes all
/// file outputs reproducible bit for bit.
std::vector<std::vector<int>> enumerate_states(int queues, long long m, long long cap);

/// Index of each state in the colexicographic enumeration.
class StateIndex {
 public:
  explicit StateIndex(const std::vector<std::vector<int>>& states);
  int at(const std::vector<int>& state) const;

 private:
  std::map<std::vector<int>, int> index_;
};

}  // namespace efr
