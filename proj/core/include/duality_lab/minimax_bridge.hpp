#pragma once

#include <string>
#include <vector>

#include "duality_lab/analysis_toolkit.hpp"
#include "duality_lab/conditional_duality.hpp"

namespace dlab {

/// One grid minimax run: x lattice {step, 2 step, ...} up to the truncation
/// bound, Y the deflator lattice of spacing `step` scaled by eta.
struct MinimaxCell {
  double step = 0.0;
  double truncation = 0.0;
  MinimaxAtom result;
};

struct MinimaxAtomReport {
  int atom = 0;
  double eta = 0.0;
  double v = 0.0;                    // v_tau(eta) from the dual solver
  double conjugacy_residual = 0.0;   // 32-point grid residual at this atom and eta
  std::vector<MinimaxCell> cells;    // step-major, truncation-minor
  double min_gap = 0.0;              // over all cells
  bool gap_ok = true;                // min_gap >= -1e-12
  bool monotone_ok = true;           // truncated values nondecreasing in the bound
  double limit_error = 0.0;          // |v~ at the largest bound - v| at the finest step
  double limit_tolerance = 0.0;
  bool limit_ok = true;
  std::vector<double> halving_ratio;       // gap(step / 2) / gap(step) at the largest bound
  std::vector<double> error_halving_ratio; // same for |v~ - v|
  double reconciliation = 0.0;       // |gap - conjugacy residual| at the finest step
};

struct MinimaxReport {
  std::vector<double> steps;
  std::vector<double> truncations;
  std::vector<MinimaxAtomReport> atoms;
  bool pass = true;                  // gap, monotonicity and limit checks on every atom
};

/// Truncated conditional duals via grid minimax on every atom of F_tau,
/// reconciled with the duality solver and the conjugacy residual. `steps`
/// should be decreasing; consecutive halvings feed halving_ratio.
MinimaxReport reconcile_minimax(const MarketModel& m, const UtilityPair& u, const StoppingTime& tau,
                                const RandomVariable& eta, const std::vector<double>& steps,
                                const std::vector<double>& truncations = {1.0, 4.0, 16.0},
                                const SolveOptions& opts = {});

}  // namespace dlab
