#include <doctest.h>

#include "efr/states.hpp"

using namespace efr;

TEST_CASE("colexicographic enumeration") {
  const auto s21 = enumerate_states(2, 1, 1000);
  REQUIRE(s21.size() == 2);
  CHECK(s21[0] == std::vector<int>{1, 0});
  CHECK(s21[1] == std::vector<int>{0, 1});

  const auto s22 = enumerate_states(2, 2, 1000);
  REQUIRE(s22.size() == 3);
  CHECK(s22[0] == std::vector<int>{2, 0});
  CHECK(s22[1] == std::vector<int>{1, 1});
  CHECK(s22[2] == std::vector<int>{0, 2});

  const auto s31 = enumerate_states(3, 1, 1000);
  REQUIRE(s31.size() == 3);
  CHECK(s31[0] == std::vector<int>{1, 0, 0});
  CHECK(s31[1] == std::vector<int>{0, 1, 0});
  CHECK(s31[2] == std::vector<int>{0, 0, 1});
}

TEST_CASE("state space sizes") {
  CHECK(state_space_size(1, 7, 100) == 1);
  CHECK(state_space_size(2, 3, 100) == 4);
  CHECK(state_space_size(3, 2, 100) == 6);  // C(4,2)
  CHECK(state_space_size(4, 6, 1000) == 84);
  CHECK_THROWS_AS(state_space_size(10, 50, 1000), SizeCapError);
  CHECK_THROWS_AS(enumerate_states(5, 20, 100), SizeCapError);
}

TEST_CASE("index lookup") {
  const auto states = enumerate_states(3, 4, 10000);
  StateIndex index(states);
  for (size_t k = 0; k < states.size(); ++k) {
    CHECK(index.at(states[k]) == static_cast<int>(k));
  }
}
