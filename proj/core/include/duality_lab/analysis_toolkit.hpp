#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "duality_lab/filtered_space.hpp"
#include "duality_lab/market_model.hpp"
#include "duality_lab/utility.hpp"

namespace dlab {

/// E[min(|X - Y|, 1)] under the weights `prob`.
double ky_fan(std::span<const double> prob, const RandomVariable& x, const RandomVariable& y);
inline double ky_fan(const FilteredSpace& space, const RandomVariable& x, const RandomVariable& y) {
  return ky_fan(space.prob(), x, y);
}

/// A sequence known through a finite prefix and an eventually periodic tail:
/// X_n = cycle[(n - prefix.size()) mod cycle.size()] + perturbation(n) for
/// n >= prefix.size(), where the perturbation tends to 0 pointwise.
struct TailSequence {
  std::vector<RandomVariable> prefix;
  std::vector<RandomVariable> cycle;
  std::function<RandomVariable(int)> perturbation;  // may be empty

  RandomVariable at(int n) const;
};

enum class LimitMode { kLimsup, kLiminf };

/// Limit superior / inferior in probability. With strictly positive weights
/// this is the per-scenario max / min over the tail cycle. Throws
/// InvalidInput on a non-finite member or an empty cycle.
RandomVariable p_lim_extremum(const TailSequence& seq, LimitMode mode);

struct CondUiResult {
  bool ok = true;
  double bound = 0.0;                  // max over atoms and members of E[G(|X|) | atom]
  std::vector<double> atom_bounds;
  std::vector<double> running_sup;     // sup over the first k members
  bool growth_flag = false;            // last running-sup ratio > 1.05
};

/// Finite-family surrogate for conditional uniform integrability via a
/// superlinear growth function. Throws InvalidInput if `growth` is not
/// superlinear on the check grid.
CondUiResult cond_ui_check(const FilteredSpace& space, std::span<const RandomVariable> family,
                           const SigmaAlgebra& g, const std::function<double(double)>& growth);

/// A G-convex, closed, bounded set of G-measurable variables, stored as the
/// per-atom interval it spans.
class ConvexCompactSet {
 public:
  /// All G-convex combinations of the generators.
  static ConvexCompactSet from_generators(const FilteredSpace& space, const SigmaAlgebra& g,
                                          std::vector<RandomVariable> generators, bool positive = true);
  /// The order interval {a <= X <= b} of G-measurable variables.
  static ConvexCompactSet order_interval(const FilteredSpace& space, const SigmaAlgebra& g,
                                         const RandomVariable& a, const RandomVariable& b, bool positive = true);

  const SigmaAlgebra& sigma() const noexcept { return g_; }
  const std::vector<double>& atom_prob() const noexcept { return prob_; }
  const std::vector<double>& lower() const noexcept { return lo_; }
  const std::vector<double>& upper() const noexcept { return hi_; }
  std::size_t atoms() const noexcept { return lo_.size(); }

  RandomVariable lower_corner() const { return g_.lift(lo_); }
  RandomVariable upper_corner() const { return g_.lift(hi_); }
  bool contains(const RandomVariable& x, double tol = 1e-12) const;
  /// Ky Fan diameter.
  double diameter() const;
  /// Independent uniform draws per atom.
  std::vector<RandomVariable> sample(std::size_t count, std::uint64_t seed) const;

 private:
  ConvexCompactSet() = default;
  SigmaAlgebra g_;
  std::vector<double> prob_;
  std::vector<double> lo_;
  std::vector<double> hi_;
};

enum class HullKind { kConvex, kPartitionSub };

/// Ky Fan distance from x to the G-convex hull (kConvex: per atom
/// [min, max] of the net) or to the partition sub-convex hull
/// (kPartitionSub: per atom (0, max] of the net).
double hull_distance(const ConvexCompactSet& k, std::span<const RandomVariable> net, const RandomVariable& x,
                     HullKind kind);

/// Greedy G-convex r-net: seeded with the lower corner, repeatedly adds the
/// member farthest from the current hull while that distance exceeds r.
std::vector<RandomVariable> ftau_convex_net(const ConvexCompactSet& k, double r);
/// Greedy partition sub-convex r-net, seeded with the upper corner.
std::vector<RandomVariable> partition_subconvex_net(const ConvexCompactSet& k, double r);

struct CoverCertificate {
  std::size_t samples = 0;
  std::size_t violations = 0;
  double max_distance = 0.0;
  std::uint64_t seed = 0;
};

CoverCertificate net_cover_certificate(const ConvexCompactSet& k, std::span<const RandomVariable> net, double r,
                                       HullKind kind, std::size_t samples, std::uint64_t seed);

/// Per-scenario x lattice {lo, lo + step, ...} up to hi.
struct LatticeSpec {
  double lo = 0.01;
  double hi = 5.0;
  double step = 0.01;
};

/// Y on one atom: lattice points (spacing `step`) of the terminal deflators
/// of the sub-tree polytope, or an explicit finite list. Every point is
/// multiplied by `scale` (the dual multiplier eta).
struct YSetSpec {
  const MarketModel* market = nullptr;
  double step = 0.01;
  double scale = 1.0;
  std::vector<RandomVariable> points;  // used when market is null; full-length vectors
};

struct MinimaxAtom {
  double sup_inf = 0.0;
  double inf_sup = 0.0;
  double gap = 0.0;           // inf_sup - sup_inf
  double lipschitz = 0.0;     // sup-norm Lipschitz constant of the kernel on the grids
  double tolerance = 0.0;     // lipschitz * step
  bool pass = true;
  std::size_t y_points = 0;
};

/// sup_x inf_y and inf_y sup_x of E[U(x) - x y | atom] over the lattice X and
/// the finite set Y, per atom of g. Throws InvalidInput for atoms with more
/// than 4 scenarios or grids beyond 1e6 combinations.
std::vector<MinimaxAtom> conditional_minimax_verify(const FilteredSpace& space, const SigmaAlgebra& g,
                                                    const UtilityPair& u, const LatticeSpec& xset,
                                                    const YSetSpec& yset);

}  // namespace dlab
