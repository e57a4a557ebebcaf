#pragma once

#include <string>
#include <vector>

#include "duality_lab/analysis_toolkit.hpp"
#include "duality_lab/conditional_duality.hpp"

namespace dlab {

enum class DecayKind { kInverse, kInverseSquare, kTable };

/// lambda_n = lambda + delta g(n), n = 1..n_max, on a fixed tree and fixed
/// martingale increments.
class MarketSequence {
 public:
  /// `delta[t-1]` must be F_{t-1}-measurable; `table[n-1]` is g(n) for kTable.
  MarketSequence(MarketModel base, std::vector<RandomVariable> delta, DecayKind decay, int n_max,
                 std::vector<double> table = {});

  const MarketModel& base() const noexcept { return base_; }
  int n_max() const noexcept { return n_max_; }
  DecayKind decay() const noexcept { return decay_; }
  double g(int n) const;
  /// Market with drift lambda + delta g(n); throws ModelError if invalid.
  MarketModel at(int n) const;
  /// Market with drift lambda + delta c (c real).
  MarketModel shifted(double c) const;

 private:
  MarketModel base_;
  std::vector<RandomVariable> delta_;
  DecayKind decay_;
  int n_max_;
  std::vector<double> table_;
};

struct VCompactnessReport {
  std::vector<double> moments;      // E[V(Z^n_T)^2] per n (inf when the market breaks)
  std::vector<double> running_sup;
  double bound = 0.0;
  double last_ratio = 1.0;
  bool unbounded = false;
  bool pass = true;
  std::string note;
};

/// de la Vallee-Poussin surrogate with G(x) = x^2 on {V(Z^n_T)}.
VCompactnessReport v_compactness_check(const MarketSequence& seq, const UtilityPair& u);

struct ConvergenceReport {
  std::vector<double> distances;    // d(Z^n_T, Z_T)
  std::vector<double> predicted;    // g(n) E[min(|dZ_T/dlambda[delta]|, 1)]
  double slope = 0.0;               // log-log least squares over n >= 4
  double prediction_ratio = 1.0;    // distance / predicted at n_max
  bool monotone = true;             // nonincreasing for n >= 4
  bool pass = true;
};

ConvergenceReport appropriate_convergence_check(const MarketSequence& seq);

struct StabilityRow {
  int n = 0;
  double dZ = 0.0;
  double dXT = 0.0;
  double dXtau = 0.0;
  double du = 0.0;
  double dv = 0.0;
  double dvprime = 0.0;
  double ducp = 0.0;
  double dU_l1 = 0.0;   // E|U(x X^n_T) - U(x X_T)|
  double v_excess = 0.0;  // max over atoms of (v^n - v)^+
};

struct StabilityOptions {
  double x0 = 1.0;           // initial wealth of the time-0 problem
  bool joint_xi = false;     // xi_n = xi (1 + 1/n)
  int burn_in = 4;
  double tolerance = 1e-3;   // final-row threshold per column
  SolveOptions solve;
};

struct StabilityReport {
  std::vector<StabilityRow> rows;
  std::vector<std::string> columns;             // judged: dZ, dXT, dXtau, du, dv, dvprime (ducp is reported only)
  std::vector<bool> column_monotone;
  std::vector<bool> column_final_ok;
  double tolerance = 1e-3;
  bool usc_ok = true;                           // (v^n - v)^+ <= |v^n - v| on every row
  double min_value = 0.0;                       // min over n and atoms of v^n
  bool pass = true;
};

StabilityReport run_stability_experiment(const MarketSequence& seq, const UtilityPair& u, const StoppingTime& tau,
                                         const RandomVariable& xi, const RandomVariable& eta,
                                         const StabilityOptions& opts = {});

/// Value of one column by name ("dZ", ..., "ducp").
double column_value(const StabilityRow& row, const std::string& column);

struct UniformConvergenceReport {
  std::vector<double> sup_gap_v;        // per n
  std::vector<double> sup_gap_vprime;   // per n
  std::size_t points = 0;               // evaluation points (over all atoms)
  double alpha = 0.0;                   // single Lipschitz constant for every n
  double max_observed_slope = 0.0;
  bool lipschitz_ok = true;
  double lower_bound = 0.0;             // min over n and points of v^n
  double tolerance = 2e-3;
  bool pass = true;
};

/// Sup over the nets of K (both kinds, radius r) together with an r-spaced
/// grid of each atom's interval, evaluated per atom by locality.
UniformConvergenceReport uniform_convergence_on_set(const MarketSequence& seq, const UtilityPair& u,
                                                    const StoppingTime& tau, const ConvexCompactSet& k,
                                                    double r = 1e-2, double tolerance = 2e-3,
                                                    const SolveOptions& opts = {});

}  // namespace dlab
