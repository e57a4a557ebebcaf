#include "duality_lab/stability_lab.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "duality_lab/errors.hpp"
#include "fixtures.hpp"

namespace dlab {
namespace {

std::vector<RandomVariable> unit_delta(std::size_t periods, std::size_t n, double c = 1.0) {
  return std::vector<RandomVariable>(periods, RandomVariable(n, c));
}

TEST(MarketSequenceTest, DecayRules) {
  const MarketSequence a(testing::fix_b(), unit_delta(1, 2), DecayKind::kInverse, 8);
  EXPECT_DOUBLE_EQ(a.g(4), 0.25);
  EXPECT_NEAR(a.at(4).lam(1)[0], 1.25, 1e-15);
  const MarketSequence b(testing::fix_b(), unit_delta(1, 2), DecayKind::kInverseSquare, 8);
  EXPECT_DOUBLE_EQ(b.g(4), 1.0 / 16);
  const MarketSequence c(testing::fix_b(), unit_delta(1, 2), DecayKind::kTable, 2, {0.3, 0.1});
  EXPECT_DOUBLE_EQ(c.g(2), 0.1);
  EXPECT_THROW(MarketSequence(testing::fix_b(), unit_delta(1, 2), DecayKind::kTable, 3, {0.3}), InvalidInput);
  EXPECT_THROW(MarketSequence(testing::fix_b(), unit_delta(2, 2), DecayKind::kInverse, 3), InvalidInput);
  EXPECT_THROW(MarketSequence(testing::fix_b(), unit_delta(1, 2), DecayKind::kInverse, 0), InvalidInput);
}

TEST(VCompactnessTest, ConstantSequence) {
  const MarketSequence seq(testing::fix_b(), unit_delta(1, 2, 0.0), DecayKind::kInverse, 8);
  const VCompactnessReport r = v_compactness_check(seq, UtilityPair::log());
  const double v_u = -std::log(0.9) - 1.0, v_d = -std::log(1.1) - 1.0;
  EXPECT_NEAR(r.bound, 0.5 * (v_u * v_u + v_d * v_d), 1e-12);
  EXPECT_TRUE(r.pass);
}

TEST(VCompactnessTest, DecayingSequenceBoundedByFirstMember) {
  const MarketSequence seq(testing::fix_b(), unit_delta(1, 2), DecayKind::kInverse, 64);
  const VCompactnessReport r = v_compactness_check(seq, UtilityPair::log());
  // Independent oracle: lambda = 2 gives E[(-ln Z - 1)^2] with Z from the 2x2 system.
  const double qv = 0.01, up = 0.1 + 2 * qv, dn = -0.1 + 2 * qv;
  const double mean = 0.5 * (up + dn), var = 0.5 * (up * up + dn * dn) - mean * mean;
  const double zu = 1 - mean / var * (up - mean), zd = 1 - mean / var * (dn - mean);
  const double bound = 0.5 * (std::pow(-std::log(zu) - 1, 2) + std::pow(-std::log(zd) - 1, 2));
  EXPECT_NEAR(r.bound, bound, 1e-12);
  EXPECT_TRUE(r.pass);
}

TEST(VCompactnessTest, ExplodingDriftIsFlagged) {
  std::vector<double> table;
  for (int n = 1; n <= 16; ++n) table.push_back(n);
  const MarketSequence seq(testing::fix_b(), unit_delta(1, 2), DecayKind::kTable, 16, table);
  const VCompactnessReport r = v_compactness_check(seq, UtilityPair::log());
  EXPECT_TRUE(r.unbounded);
  EXPECT_FALSE(r.pass);
}

TEST(AppropriateConvergenceTest, ConstantSequenceIsZero) {
  const MarketSequence seq(testing::fix_b(), unit_delta(1, 2, 0.0), DecayKind::kInverse, 8);
  const ConvergenceReport r = appropriate_convergence_check(seq);
  for (double d : r.distances) EXPECT_EQ(d, 0.0);
  EXPECT_TRUE(r.pass);
}

TEST(AppropriateConvergenceTest, InverseDecayMatchesFiniteDifference) {
  const MarketSequence seq(testing::fix_b(), unit_delta(1, 2), DecayKind::kInverse, 64);
  const ConvergenceReport r = appropriate_convergence_check(seq);
  EXPECT_GE(r.prediction_ratio, 0.8);
  EXPECT_LE(r.prediction_ratio, 1.2);
  EXPECT_NEAR(r.slope, -1.0, 0.2);
  EXPECT_TRUE(r.monotone);
}

TEST(AppropriateConvergenceTest, InverseSquareSlope) {
  const MarketSequence seq(testing::fix_b(), unit_delta(1, 2), DecayKind::kInverseSquare, 64);
  const ConvergenceReport r = appropriate_convergence_check(seq);
  EXPECT_NEAR(r.slope, -2.0, 0.2);
  EXPECT_TRUE(r.pass);
}

TEST(StabilityExperimentTest, ConstantSequenceIsFlat) {
  const MarketSequence seq(testing::two_period_b(), unit_delta(2, 4, 0.0), DecayKind::kInverse, 6);
  const StabilityReport r = run_stability_experiment(seq, UtilityPair::log(), StoppingTime::constant(4, 1),
                                                     RandomVariable(4, 1.0), RandomVariable(4, 1.0));
  ASSERT_EQ(r.rows.size(), 6u);
  for (const auto& row : r.rows) {
    for (const char* c : {"dZ", "dXT", "dXtau", "du", "dv", "dvprime", "ducp"}) EXPECT_LE(column_value(row, c), 1e-8);
  }
  EXPECT_TRUE(r.pass);
}

TEST(StabilityExperimentTest, TwoPeriodIntermediateWealthConverges) {
  const MarketSequence seq(testing::two_period_b(), unit_delta(2, 4), DecayKind::kInverse, 64);
  const StabilityReport r = run_stability_experiment(seq, UtilityPair::log(), StoppingTime::constant(4, 1),
                                                     RandomVariable(4, 1.0), RandomVariable(4, 1.0));
  // Independent oracle for the log optimizer: X_tau = 1 / Z_1 at lambda and at lambda_64.
  auto z1 = [](double lam) {
    const double up = 0.1 + 0.01 * lam, dn = -0.1 + 0.01 * lam;
    const double mean = 0.5 * (up + dn), var = 0.5 * (up * up + dn * dn) - mean * mean;
    return std::pair{1 - mean / var * (up - mean), 1 - mean / var * (dn - mean)};
  };
  const auto [bu, bd] = z1(1.0);
  const auto [nu, nd] = z1(1.0 + 1.0 / 64);
  const double expected = 0.5 * std::abs(1 / nu - 1 / bu) + 0.5 * std::abs(1 / nd - 1 / bd);
  EXPECT_NEAR(r.rows.back().dXtau, expected, 1e-7);
  for (std::size_t i = 4; i < r.rows.size(); ++i) EXPECT_LE(r.rows[i].dXtau, r.rows[i - 1].dXtau);
  EXPECT_TRUE(r.usc_ok);
}

TEST(StabilityExperimentTest, JointWealthSequence) {
  // With a constant market, |u(xi (1 + 1/n)) - u(xi)| = ln(1 + 1/n) for log.
  const MarketSequence seq(testing::fix_b(), unit_delta(1, 2, 0.0), DecayKind::kInverse, 8);
  StabilityOptions opts;
  opts.joint_xi = true;
  const StabilityReport r = run_stability_experiment(seq, UtilityPair::log(), StoppingTime::constant(2, 0),
                                                     RandomVariable(2, 1.0), RandomVariable(2, 1.0), opts);
  for (const auto& row : r.rows) EXPECT_NEAR(row.du, std::log(1.0 + 1.0 / row.n), 1e-9);
}

TEST(StabilityExperimentTest, UnknownColumn) {
  EXPECT_THROW(column_value(StabilityRow{}, "dW"), InvalidInput);
}

TEST(UniformConvergenceTest, SingletonReducesToPointwise) {
  const MarketModel base = testing::two_period_b();
  const MarketSequence seq(base, unit_delta(2, 4), DecayKind::kInverse, 8);
  const StoppingTime tau = StoppingTime::constant(4, 1);
  const SigmaAlgebra g = base.space().sigma_at(tau);
  const ConvexCompactSet k = ConvexCompactSet::from_generators(base.space(), g, {RandomVariable(4, 1.0)});
  const UniformConvergenceReport r = uniform_convergence_on_set(seq, UtilityPair::log(), tau, k, 1e-2, 2e-3);
  const StabilityReport s = run_stability_experiment(seq, UtilityPair::log(), tau, RandomVariable(4, 1.0),
                                                     RandomVariable(4, 1.0));
  for (std::size_t n = 0; n < 8; ++n) EXPECT_NEAR(r.sup_gap_v[n], s.rows[n].dv, 1e-12);
}

TEST(UniformConvergenceTest, IntervalWithSingleLipschitzConstant) {
  const MarketModel base = testing::two_period_b();
  const MarketSequence seq(base, unit_delta(2, 4), DecayKind::kInverse, 8);
  const StoppingTime tau = StoppingTime::constant(4, 1);
  const SigmaAlgebra g = base.space().sigma_at(tau);
  const ConvexCompactSet k = ConvexCompactSet::order_interval(base.space(), g, RandomVariable(4, 0.5),
                                                              RandomVariable(4, 2.0));
  const UniformConvergenceReport r = uniform_convergence_on_set(seq, UtilityPair::log(), tau, k, 0.1, 2e-3);
  EXPECT_TRUE(r.lipschitz_ok);
  // Log values differ from -ln(eta) - 1 only by a market constant, so |v'| <= 1 / 0.5 on K.
  EXPECT_LE(r.max_observed_slope, 2.0 + 1e-9);
  EXPECT_GE(r.alpha, r.max_observed_slope);
  for (std::size_t n = 1; n < r.sup_gap_v.size(); ++n) EXPECT_LE(r.sup_gap_v[n], r.sup_gap_v[n - 1] + 1e-12);
}

TEST(UniformConvergenceTest, RejectsSetTouchingZero) {
  const MarketModel base = testing::fix_b();
  const MarketSequence seq(base, unit_delta(1, 2), DecayKind::kInverse, 4);
  const StoppingTime tau = StoppingTime::constant(2, 0);
  const SigmaAlgebra g = base.space().sigma_at(tau);
  const ConvexCompactSet k = ConvexCompactSet::order_interval(base.space(), g, RandomVariable(2, 0.0),
                                                              RandomVariable(2, 1.0), false);
  EXPECT_THROW(uniform_convergence_on_set(seq, UtilityPair::log(), tau, k), InvalidInput);
}

}  // namespace
}  // namespace dlab
