#pragma once

#include <optional>
#include <string>
#include <vector>

#include "duality_lab/filtered_space.hpp"

namespace dlab {

/// One-period data at an internal node of the scenario tree.
struct NodeStep {
  std::vector<int> children;       // child node ids
  std::vector<double> cond_prob;   // P(child | node)
  std::vector<double> dS;          // price increment on each child
  double mean_dS = 0.0;
  double var_dS = 0.0;
  /// Admissible proportional positions h (wealth factor 1 + h dS >= 0 on
  /// every child) form [h_lo, h_hi]; an endpoint is absent when unbounded.
  std::optional<double> h_lo;
  std::optional<double> h_hi;
};

/// Discretized lambda-market S = 1 + M + sum lambda d<M> on a finite tree.
/// Increments are indexed by period t = 1..T (the move from t-1 to t).
class MarketModel {
 public:
  /// Validates and builds the market. `dM[t-1]` is the F_t-measurable
  /// increment of period t, `lam[t-1]` its F_{t-1}-measurable drift.
  /// Throws ModelError for non-martingale increments, non-predictable
  /// drift or a nonpositive price; InvalidInput for shape errors.
  static MarketModel build(FilteredSpace space, std::vector<RandomVariable> dM,
                           std::vector<RandomVariable> lam);

  /// All violations found in a candidate description (empty when valid).
  static std::vector<std::string> diagnose(const FilteredSpace& space,
                                           const std::vector<RandomVariable>& dM,
                                           const std::vector<RandomVariable>& lam);

  const FilteredSpace& space() const noexcept { return space_; }
  int horizon() const noexcept { return space_.horizon(); }

  const RandomVariable& dM(int t) const { return dM_.at(static_cast<std::size_t>(t - 1)); }
  const RandomVariable& lam(int t) const { return lam_.at(static_cast<std::size_t>(t - 1)); }
  /// Predictable quadratic variation increment E[(dM_t)^2 | F_{t-1}].
  const RandomVariable& qv(int t) const { return qv_.at(static_cast<std::size_t>(t - 1)); }
  const RandomVariable& dS(int t) const { return dS_.at(static_cast<std::size_t>(t - 1)); }
  /// Price at time t = 0..T, with S_0 = 1.
  const RandomVariable& S(int t) const { return S_.at(static_cast<std::size_t>(t)); }

  /// One-period data for an internal node (node.t < T).
  const NodeStep& step(int node) const;

  /// Same filtration and increments, drift replaced.
  MarketModel with_drift(std::vector<RandomVariable> lam) const;

 private:
  MarketModel(FilteredSpace space, std::vector<RandomVariable> dM, std::vector<RandomVariable> lam);

  FilteredSpace space_;
  std::vector<RandomVariable> dM_;
  std::vector<RandomVariable> lam_;
  std::vector<RandomVariable> qv_;
  std::vector<RandomVariable> dS_;
  std::vector<RandomVariable> S_;
  std::vector<NodeStep> steps_;  // indexed by node id; empty for terminal nodes
};

/// Density path Z_0..Z_T of the discrete minimal martingale measure: per
/// node z = 1 - a (dS - E[dS]) with a = E[dS] / Var(dS). Throws ModelError
/// "density nonpositive" when some factor is <= 0 and "arbitrage" when a
/// node has Var(dS) = 0 but E[dS] != 0.
std::vector<RandomVariable> build_density(const MarketModel& market);

/// Strictly positive martingale measure found by maximizing min_w q_w with
/// the simplex method; nullopt when that minimum is below `eps`.
std::optional<RandomVariable> equivalent_martingale_measure(const MarketModel& market,
                                                            double eps = 1e-9);

/// True iff a martingale measure with every q_w >= 1e-9 exists.
bool check_nflvr(const MarketModel& market);

/// Linear node inequality sum_c coeff_c Y_c <= Y_node; `position` is the
/// proportional holding it encodes (0 for the plain supermartingale row).
struct DeflatorConstraint {
  int node = -1;
  std::vector<int> children;
  std::vector<double> coeffs;
  double position = 0.0;
};

/// Supermartingale-deflator characterization on [tau, T]: Y = 1 at the root
/// nodes (the F_tau atoms) and every constraint holds.
struct DeflatorConstraintSet {
  std::vector<int> roots;
  std::vector<DeflatorConstraint> constraints;
};

/// Constraint (i) followed by the endpoint rows of one internal node.
std::vector<DeflatorConstraint> deflator_rows(const MarketModel& market, int node);

DeflatorConstraintSet deflator_constraints(const MarketModel& market, const StoppingTime& tau);

/// Node ids of the sub-tree rooted at `root` in breadth-first order (root first).
std::vector<int> subtree_nodes(const FilteredSpace& space, int root);

}  // namespace dlab
