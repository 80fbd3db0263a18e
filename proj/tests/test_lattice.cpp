#include "ato/lattice.hpp"

#include <gtest/gtest.h>

#include "ato/oracle.hpp"

namespace ato {
namespace {

TEST(Lattice, ProductOrderExamples) {
  EXPECT_TRUE(leq({0, 0}, {1, 2}));
  EXPECT_FALSE(leq({1, 2}, {2, 1}));
  EXPECT_FALSE(leq({2, 1}, {1, 2}));
  const StateX x{1, 2, 3};
  EXPECT_TRUE(leq(x, x));
}

TEST(Lattice, LeqRejectsDimensionMismatch) {
  EXPECT_THROW(leq({1, 2}, {1, 2, 3}), std::invalid_argument);
}

TEST(Lattice, BottomAndTop) {
  const CapacityVector caps({3, 4});
  EXPECT_EQ(bottom(caps), (StateX{0, 0}));
  EXPECT_EQ(top(caps), (StateX{3, 4}));
  EXPECT_TRUE(leq(bottom(caps), top(caps)));
}

TEST(Lattice, SingletonDetection) {
  EXPECT_TRUE(is_singleton({{1, 1}, {1, 1}}));
  EXPECT_FALSE(is_singleton({{0, 0}, {0, 1}}));
  const CapacityVector caps({1, 1});
  EXPECT_FALSE(is_singleton(full_interval(caps)));
}

TEST(Lattice, MinMaxStayInside) {
  const CapacityVector caps({2, 3, 1});
  const auto states = enumerate_states(caps);
  for (const StateX& x : states)
    for (const StateX& y : states) {
      EXPECT_TRUE(caps.contains(component_min(x, y)));
      EXPECT_TRUE(caps.contains(component_max(x, y)));
      EXPECT_TRUE(leq(component_min(x, y), x));
      EXPECT_TRUE(leq(y, component_max(x, y)));
    }
}

TEST(Lattice, IntervalMembershipMatchesEnumeration) {
  const CapacityVector caps({2, 2});
  const auto states = enumerate_states(caps);
  const IntervalX iv{{1, 0}, {2, 1}};
  std::size_t inside = 0;
  for (const StateX& x : states) {
    const bool expect = x[0] >= 1 && x[0] <= 2 && x[1] <= 1;
    EXPECT_EQ(interval_contains(iv, x), expect);
    inside += interval_contains(iv, x);
  }
  EXPECT_EQ(inside, 4u);
}

TEST(Lattice, CapacityValidation) {
  EXPECT_THROW(CapacityVector(std::vector<int>{}), ConfigError);
  EXPECT_THROW(CapacityVector({0}), ConfigError);
  EXPECT_THROW(CapacityVector(std::vector<int>(64, 1)), ConfigError);
  EXPECT_NO_THROW(CapacityVector(std::vector<int>(63, 1)));
}

TEST(Lattice, Rendering) {
  EXPECT_EQ(to_string(StateX{1, 2, 3}), "(1,2,3)");
  EXPECT_EQ(to_string(ItemMask{0b101}), "[1,3]");
  EXPECT_EQ(interval_width_1norm({{0, 1}, {2, 3}}), 4);
}

TEST(Lattice, CappedIncrementStopsAtCapacity) {
  const CapacityVector caps({2, 2});
  EXPECT_EQ(capped_increment({2, 1}, 0b11, caps), (StateX{2, 2}));
  EXPECT_EQ(capped_increment({0, 0}, 0b10, caps), (StateX{0, 1}));
}

}  // namespace
}  // namespace ato
