#pragma once

#include <string>
#include <vector>

#include "duality_lab/barrier_solver.hpp"
#include "duality_lab/filtered_space.hpp"
#include "duality_lab/market_model.hpp"
#include "duality_lab/utility.hpp"
#include "duality_lab/worker_pool.hpp"

namespace dlab {

struct SolveOptions {
  BarrierOptions barrier;
  /// Lower bound imposed on the terminal deflator (0 keeps only Y > 0).
  double deflator_floor = 0.0;
  /// Interior dual start: Y_n = start_scale^depth * (density ratio at n).
  double start_scale = 0.9;
  /// Optional fan-out over atoms; results are identical with or without it.
  const WorkerPool* pool = nullptr;
};

/// Conditional primal problem on the sub-tree of `root` with initial wealth
/// `xi`. `wealth` is absolute and indexed like `nodes` (breadth-first).
struct NodePrimal {
  double value = 0.0;
  double uprime = 0.0;
  double kkt = 0.0;
  std::vector<int> nodes;
  std::vector<double> wealth;
};

/// Conditional dual problem on the sub-tree of `root` for multiplier `eta`.
/// `deflator` is normalized to 1 at the root.
struct NodeDual {
  double value = 0.0;
  double vprime = 0.0;
  double kkt = 0.0;
  std::vector<int> nodes;
  std::vector<double> deflator;
};

NodePrimal solve_primal_at_node(const MarketModel& m, const UtilityPair& u, int root, double xi,
                                const SolveOptions& opts = {});
NodeDual solve_dual_at_node(const MarketModel& m, const UtilityPair& u, int root, double eta,
                            const SolveOptions& opts = {});

/// Per-atom values, optimizers and derivatives at a stopping time. X_hat and
/// Y_hat are normalized (unit initial wealth, Y = 1 on the atom); the paths
/// are indexed by t = 0..T and equal 1 before tau.
struct DualityResult {
  SigmaAlgebra atoms;
  std::vector<double> atom_values_u;
  std::vector<double> atom_values_v;
  std::vector<double> u_prime;
  std::vector<double> v_prime;
  RandomVariable X_hat;
  RandomVariable Y_hat;
  double kkt_residual = 0.0;
  std::vector<RandomVariable> wealth_path;
  std::vector<RandomVariable> deflator_path;
  std::vector<double> node_wealth;    // per node id, NaN before tau
  std::vector<double> node_deflator;  // per node id, NaN before tau
};

/// Throws InvalidInput if xi is not positive and F_tau-measurable,
/// SolverError "primal unbounded" when the value diverges.
DualityResult primal_solve(const MarketModel& m, const UtilityPair& u, const StoppingTime& tau,
                           const RandomVariable& xi, const SolveOptions& opts = {});
/// Throws SolverError "dual unbounded below" when the value diverges.
DualityResult dual_solve(const MarketModel& m, const UtilityPair& u, const StoppingTime& tau,
                         const RandomVariable& eta, const SolveOptions& opts = {});

struct DerivativeReport {
  std::vector<double> formula;            // -(1/eta) E[h I(h) | atom], h = eta Y_hat
  std::vector<double> finite_difference;  // central, step 1e-4 eta
  double max_rel_gap = 0.0;
  bool consistent = true;                 // gap <= 5e-3
  std::string diagnostic;
};

DerivativeReport dual_derivative(const MarketModel& m, const UtilityPair& u, const StoppingTime& tau,
                                 const RandomVariable& eta, const SolveOptions& opts = {});

struct ConjugacyEntry {
  double eta = 0.0;
  int atom = 0;
  double v = 0.0;
  double grid_max = 0.0;        // max over the geometric xi grid of u(xi) - xi eta
  double xi_argmax = 0.0;
  double residual = 0.0;        // |v - grid_max|
  double refined_max = 0.0;     // Brent refinement inside the bracketing grid cell
  double refined_residual = 0.0;
};

struct ConjugacyReport {
  int grid_points = 0;
  std::vector<ConjugacyEntry> entries;
  double max_residual = 0.0;
  double max_refined_residual = 0.0;
};

/// Compares v_tau(eta) with max over a geometric grid spanning
/// [I(1e3 eta), I(1e-3 eta)] of u_tau(xi) - xi eta, per atom and eta.
ConjugacyReport conjugacy_check(const MarketModel& m, const UtilityPair& u, const StoppingTime& tau,
                                const std::vector<double>& etas, int grid_points = 32,
                                const SolveOptions& opts = {});

struct DualRelationReport {
  std::vector<double> eta;   // u'(xi) per atom
  RandomVariable residual;   // |eta Y - U'(xi X)| / U'(xi X) per scenario
  double max_residual = 0.0;
};

DualRelationReport dual_relation_check(const MarketModel& m, const UtilityPair& u, const StoppingTime& tau,
                                       const RandomVariable& xi, const SolveOptions& opts = {});

/// U_t = u_t(X_t) along the optimal wealth from time 0 with initial wealth x.
struct ValueProcessReport {
  std::vector<double> node_value;   // per node id
  std::vector<double> node_wealth;  // absolute optimal wealth per node id
  std::vector<RandomVariable> process;
  double max_martingale_residual = 0.0;
  double max_terminal_gap = 0.0;    // |U_t - E[U(X_T) | F_t]|
};

ValueProcessReport value_process(const MarketModel& m, const UtilityPair& u, double x,
                                 const SolveOptions& opts = {});

struct OracleGrid {
  double step = 1e-3;       // spacing of proportional positions
  int refine_levels = 0;    // extra zoom passes, step / 10 each, around the best point
  double max_points = 5e7;  // per level, refused beyond
};

struct OracleResult {
  std::vector<double> atom_values;
  std::vector<std::vector<double>> positions;  // best proportional position per internal node
  RandomVariable X_T;                          // normalized terminal wealth at the best point
};

/// Exhaustive search over proportional positions h in [h_lo, h_hi] at each
/// node. Refuses sub-trees with more than 4 internal nodes.
OracleResult brute_force_oracle(const MarketModel& m, const UtilityPair& u, const StoppingTime& tau,
                                const RandomVariable& xi, const OracleGrid& grid = {});

}  // namespace dlab
