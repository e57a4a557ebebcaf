#include "duality_lab/filtered_space.hpp"

#include <gtest/gtest.h>

#include "duality_lab/errors.hpp"
#include "fixtures.hpp"

namespace dlab {
namespace {

TEST(FilteredSpaceTest, BuildsTreeNodes) {
  const FilteredSpace sp = testing::two_period_binary_space();
  EXPECT_EQ(sp.horizon(), 2);
  EXPECT_EQ(sp.nodes().size(), 7u);
  const Node& root = sp.node(sp.node_of(0, 0));
  EXPECT_EQ(root.children.size(), 2u);
  EXPECT_DOUBLE_EQ(root.prob, 1.0);
  const Node& up = sp.node(sp.node_of(1, 1));
  EXPECT_EQ(up.scenarios, (std::vector<int>{0, 1}));
  EXPECT_DOUBLE_EQ(up.prob, 0.5);
  EXPECT_EQ(sp.node(sp.node_of(2, 3)).parent, sp.node_of(1, 2));
}

TEST(FilteredSpaceTest, DiagnoseReportsEveryViolation) {
  const auto issues = FilteredSpace::diagnose({0.5, 0.4}, {{{0, 1}}, {{0}, {0, 1}}});
  ASSERT_GE(issues.size(), 2u);
  EXPECT_NE(issues[0].find("sum to 1"), std::string::npos);
  EXPECT_THROW(FilteredSpace({0.5, 0.4}, {{{0, 1}}, {{0}, {1}}}), InvalidInput);
}

TEST(FilteredSpaceTest, DiagnoseNamesNonRefiningTime) {
  const auto issues = FilteredSpace::diagnose(
      {0.25, 0.25, 0.25, 0.25}, {{{0, 1, 2, 3}}, {{0, 1}, {2, 3}}, {{0, 2}, {1, 3}}, {{0}, {1}, {2}, {3}}});
  ASSERT_FALSE(issues.empty());
  EXPECT_NE(issues[0].find("t=2"), std::string::npos);
}

TEST(FilteredSpaceTest, NontrivialInitialPartitionIsAllowed) {
  const FilteredSpace sp({0.25, 0.25, 0.5}, {{{0, 1}, {2}}, {{0}, {1}, {2}}});
  EXPECT_EQ(sp.sigma_at_time(0).size(), 2u);
}

TEST(CondExpectTest, ConstantIsInvariant) {
  const FilteredSpace sp = testing::two_period_binary_space();
  const RandomVariable c(4, 3.25);
  for (int t = 0; t <= 2; ++t) EXPECT_EQ(cond_expect(sp, c, sp.sigma_at_time(t)), c);
}

TEST(CondExpectTest, TerminalConditioningIsIdentity) {
  const FilteredSpace sp = testing::two_period_binary_space();
  const RandomVariable x{1.0, -2.0, 0.5, 7.0};
  EXPECT_EQ(cond_expect(sp, x, sp.sigma_at_time(2)), x);
}

TEST(CondExpectTest, HandSum) {
  const FilteredSpace sp = testing::binary_space();
  const RandomVariable e = cond_expect(sp, RandomVariable{0.0, 2.0}, sp.sigma_at_time(0));
  EXPECT_DOUBLE_EQ(e[0], 1.0);
  EXPECT_DOUBLE_EQ(e[1], 1.0);
}

TEST(CondExpectTest, TowerPropertyOnUnequalWeights) {
  const FilteredSpace sp({0.1, 0.2, 0.3, 0.4}, {{{0, 1, 2, 3}}, {{0, 1}, {2, 3}}, {{0}, {1}, {2}, {3}}});
  const RandomVariable x{4.0, -1.0, 2.0, 3.0};
  const RandomVariable inner = cond_expect(sp, x, sp.sigma_at_time(1));
  EXPECT_NEAR(inner[0], (0.1 * 4.0 - 0.2 * 1.0) / 0.3, 1e-15);
  EXPECT_NEAR(inner[3], (0.3 * 2.0 + 0.4 * 3.0) / 0.7, 1e-15);
  EXPECT_NEAR(cond_expect(sp, inner, sp.sigma_at_time(0))[0], sp.expectation(x), 1e-15);
}

TEST(EssentialExtremumTest, Singleton) {
  const FilteredSpace sp = testing::binary_space();
  const std::vector<RandomVariable> fam{{1.0, 3.0}};
  EXPECT_EQ(essential_extremum(fam, sp.sigma_at_time(1), Extremum::kSup), fam[0]);
}

TEST(EssentialExtremumTest, PerAtomMaxAndMin) {
  const FilteredSpace sp = testing::binary_space();
  const std::vector<RandomVariable> fam{{1.0, 3.0}, {2.0, 2.0}};
  EXPECT_EQ(essential_extremum(fam, sp.sigma_at_time(1), Extremum::kSup), (RandomVariable{2.0, 3.0}));
  EXPECT_EQ(essential_extremum(fam, sp.sigma_at_time(1), Extremum::kInf), (RandomVariable{1.0, 2.0}));
}

TEST(EssentialExtremumTest, RejectsEmptyAndNonMeasurable) {
  const FilteredSpace sp = testing::binary_space();
  EXPECT_THROW(essential_extremum({}, sp.sigma_at_time(1), Extremum::kSup), InvalidInput);
  const std::vector<RandomVariable> fam{{1.0, 3.0}};
  EXPECT_THROW(essential_extremum(fam, sp.sigma_at_time(0), Extremum::kSup), InvalidInput);
}

TEST(StoppingTimeTest, DeterministicTimes) {
  const FilteredSpace sp = testing::two_period_binary_space();
  EXPECT_TRUE(check_stopping_time(sp, std::vector<int>(4, 0)));
  EXPECT_TRUE(check_stopping_time(sp, std::vector<int>(4, 2)));
}

TEST(StoppingTimeTest, StopOnUpCellOnly) {
  const FilteredSpace sp = testing::two_period_binary_space();
  EXPECT_TRUE(check_stopping_time(sp, std::vector<int>{1, 1, 2, 2}));
  EXPECT_FALSE(check_stopping_time(sp, std::vector<int>{1, 2, 2, 2}));
  EXPECT_FALSE(check_stopping_time(sp, std::vector<int>{3, 3, 3, 3}));
}

TEST(StoppingTimeTest, SigmaAtTauAtoms) {
  const FilteredSpace sp = testing::two_period_binary_space();
  const SigmaAlgebra g = sp.sigma_at(StoppingTime(std::vector<int>{1, 1, 2, 2}));
  ASSERT_EQ(g.size(), 3u);
  EXPECT_EQ(g.atom(0).scenarios, (std::vector<int>{0, 1}));
  EXPECT_EQ(g.atom(0).time, 1);
  EXPECT_DOUBLE_EQ(g.atom(0).prob, 0.5);
  EXPECT_EQ(g.atom_of(3), 2);
  EXPECT_THROW(sp.sigma_at(StoppingTime(std::vector<int>{1, 2, 2, 2})), InvalidInput);
}

TEST(SigmaAlgebraTest, LiftAndMeasurability) {
  const FilteredSpace sp = testing::two_period_binary_space();
  const SigmaAlgebra g = sp.sigma_at_time(1);
  const RandomVariable x = g.lift(std::vector<double>{2.0, 5.0});
  EXPECT_EQ(x, (RandomVariable{2.0, 2.0, 5.0, 5.0}));
  EXPECT_TRUE(g.is_measurable(x));
  EXPECT_FALSE(g.is_measurable(RandomVariable{2.0, 2.1, 5.0, 5.0}));
  EXPECT_TRUE(g.is_measurable(RandomVariable{2.0, 2.1, 5.0, 5.0}, 0.2));
}

}  // namespace
}  // namespace dlab
