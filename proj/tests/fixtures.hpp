#pragma once

#include <vector>

#include "duality_lab/market_model.hpp"

namespace dlab::testing {

inline FilteredSpace binary_space() { return FilteredSpace({0.5, 0.5}, {{{0, 1}}, {{0}, {1}}}); }

/// One period, dM = (+0.1, -0.1), equal weights, zero drift.
inline MarketModel fix_a() { return MarketModel::build(binary_space(), {{0.1, -0.1}}, {{0.0, 0.0}}); }

/// FIX-A with lambda = 1, so lambda d<M> = 0.01.
inline MarketModel fix_b() { return MarketModel::build(binary_space(), {{0.1, -0.1}}, {{1.0, 1.0}}); }

/// Uniform trinomial with dS = (+0.1, 0, -0.1).
inline MarketModel fix_c() {
  FilteredSpace sp({1.0 / 3, 1.0 / 3, 1.0 / 3}, {{{0, 1, 2}}, {{0}, {1}, {2}}});
  return MarketModel::build(sp, {{0.1, 0.0, -0.1}}, {{0.0, 0.0, 0.0}});
}

inline FilteredSpace two_period_binary_space() {
  return FilteredSpace({0.25, 0.25, 0.25, 0.25}, {{{0, 1, 2, 3}}, {{0, 1}, {2, 3}}, {{0}, {1}, {2}, {3}}});
}

/// FIX-B dynamics repeated over two periods.
inline MarketModel two_period_b(double lam = 1.0) {
  return MarketModel::build(two_period_binary_space(), {{0.1, 0.1, -0.1, -0.1}, {0.1, -0.1, 0.1, -0.1}},
                            {RandomVariable(4, lam), RandomVariable(4, lam)});
}

/// Two-period uniform trinomial with a cell-dependent drift.
inline MarketModel two_period_trinomial() {
  std::vector<double> prob(9, 1.0 / 9);
  Partition f0{{0, 1, 2, 3, 4, 5, 6, 7, 8}};
  Partition f1{{0, 1, 2}, {3, 4, 5}, {6, 7, 8}};
  Partition f2;
  for (int s = 0; s < 9; ++s) f2.push_back({s});
  FilteredSpace sp(prob, {f0, f1, f2});
  RandomVariable dm1{0.1, 0.1, 0.1, 0.0, 0.0, 0.0, -0.1, -0.1, -0.1};
  RandomVariable dm2{0.1, 0.0, -0.1, 0.1, 0.0, -0.1, 0.1, 0.0, -0.1};
  RandomVariable lam1(9, 1.5);
  RandomVariable lam2{2.0, 2.0, 2.0, 0.5, 0.5, 0.5, -1.0, -1.0, -1.0};
  return MarketModel::build(sp, {dm1, dm2}, {lam1, lam2});
}

}  // namespace dlab::testing
