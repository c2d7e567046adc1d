#include "efr/states.hpp"

#include <string>

namespace efr {

long long state_space_size(int queues, long long m, long long cap) {
  // C(m+queues-1, queues-1) with early bail-out against the cap.
  long long count = 1;
  for (int k = 1; k < queues; ++k) {
    count = count * (m + k) / k;  // exact: product of consecutive binomials
    if (count > cap) {
      throw SizeCapError("state space of " + std::to_string(queues) + " queues with " +
                         std::to_string(m) + " units exceeds cap " + std::to_string(cap));
    }
  }
  return count;
}

std::vector<std::vector<int>> enumerate_states(int queues, long long m, long long cap) {
  const long long count = state_space_size(queues, m, cap);
  std::vector<std::vector<int>> states;
  states.reserve(static_cast<size_t>(count));
  std::vector<int> state(queues, 0);
  // Recursion over the last coordinate yields colexicographic order.
  auto fill = [&](auto&& self, int prefix_len, int remaining) -> void {
    if (prefix_len == 1) {
      state[0] = remaining;
      states.push_back(state);
      return;
    }
    for (int last = 0; last <= remaining; ++last) {
      state[prefix_len - 1] = last;
      self(self, prefix_len - 1, remaining - last);
    }
  };
  fill(fill, queues, static_cast<int>(m));
  return states;
}

StateIndex::StateIndex(const std::vector<std::vector<int>>& states) {
  for (size_t k = 0; k < states.size(); ++k) {
    index_.emplace(states[k], static_cast<int>(k));
  }
}

int StateIndex::at(const std::vector<int>& state) const {
  auto it = index_.find(state);
  if (it == index_.end()) throw std::logic_error("state not in enumeration");
  return it->second;
}

}  // namespace efr
