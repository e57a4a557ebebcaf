#include "duality_lab/minimax_bridge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "duality_lab/errors.hpp"

namespace dlab {

namespace {

constexpr const char* kModule = "minimax_bridge";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double ratio(double num, double den) { return den > 1e-15 ? num / den : kNaN; }

}  // namespace

MinimaxReport reconcile_minimax(const MarketModel& m, const UtilityPair& u, const StoppingTime& tau,
                                const RandomVariable& eta, const std::vector<double>& steps,
                                const std::vector<double>& truncations, const SolveOptions& opts) {
  const FilteredSpace& sp = m.space();
  const SigmaAlgebra atoms = sp.sigma_at(tau);
  if (steps.empty() || truncations.empty()) throw InvalidInput(kModule, "need at least one step and one truncation");
  for (double s : steps) {
    if (!(s > 0.0)) throw InvalidInput(kModule, "grid steps must be positive");
  }
  for (double n : truncations) {
    if (!(n > 0.0)) throw InvalidInput(kModule, "truncation bounds must be positive");
  }
  if (eta.size() != sp.size() || !atoms.is_measurable(eta, 1e-12)) {
    throw InvalidInput(kModule, "eta must be F_tau-measurable");
  }
  const std::vector<double> eta_atom = atoms.atom_values(eta);
  for (std::size_t a = 0; a < eta_atom.size(); ++a) {
    if (!(eta_atom[a] > 0.0)) throw InvalidInput(kModule, fmt::format("eta must be positive (atom {})", a));
  }
  std::vector<double> distinct = eta_atom;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  // One verify call per (eta value, step, truncation); atoms are picked by eta.
  const std::size_t ns = steps.size();
  const std::size_t nt = truncations.size();
  const std::size_t jobs = distinct.size() * ns * nt;
  std::vector<std::vector<MinimaxAtom>> runs(jobs);
  auto job = [&](std::size_t j) {
    const double e = distinct[j / (ns * nt)];
    const double s = steps[(j / nt) % ns];
    const double n = truncations[j % nt];
    runs[j] = conditional_minimax_verify(sp, atoms, u, LatticeSpec{s, n, s}, YSetSpec{&m, s, e, {}});
  };
  if (opts.pool != nullptr) {
    opts.pool->parallel_for(jobs, job);
  } else {
    for (std::size_t j = 0; j < jobs; ++j) job(j);
  }

  SolveOptions inner = opts;
  inner.pool = nullptr;
  const DualityResult dual = dual_solve(m, u, tau, eta, inner);
  const ConjugacyReport conj = conjugacy_check(m, u, tau, distinct, 32, inner);

  MinimaxReport rep;
  rep.steps = steps;
  rep.truncations = truncations;
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    MinimaxAtomReport ar;
    ar.atom = static_cast<int>(a);
    ar.eta = eta_atom[a];
    ar.v = dual.atom_values_v[a];
    const auto e_idx = static_cast<std::size_t>(
        std::lower_bound(distinct.begin(), distinct.end(), ar.eta) - distinct.begin());
    for (const auto& entry : conj.entries) {
      if (entry.atom == ar.atom && entry.eta == ar.eta) ar.conjugacy_residual = entry.residual;
    }
    ar.min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < ns; ++s) {
      double prev = -std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < nt; ++t) {
        const MinimaxAtom& r = runs[(e_idx * ns + s) * nt + t][a];
        ar.cells.push_back({steps[s], truncations[t], r});
        ar.min_gap = std::min(ar.min_gap, r.gap);
        if (r.inf_sup < prev - 1e-12) ar.monotone_ok = false;
        prev = r.inf_sup;
      }
    }
    auto at = [&](std::size_t s) -> const MinimaxAtom& { return ar.cells[s * nt + nt - 1].result; };
    ar.gap_ok = ar.min_gap >= -1e-12;
    const std::size_t fine = ns - 1;
    ar.limit_error = std::abs(at(fine).inf_sup - ar.v);
    ar.limit_tolerance = 2.0 * steps[fine];
    ar.limit_ok = ar.limit_error <= ar.limit_tolerance;
    for (std::size_t s = 0; s + 1 < ns; ++s) {
      ar.halving_ratio.push_back(ratio(at(s + 1).gap, at(s).gap));
      ar.error_halving_ratio.push_back(
          ratio(std::abs(at(s + 1).inf_sup - ar.v), std::abs(at(s).inf_sup - ar.v)));
    }
    ar.reconciliation = std::abs(at(fine).gap - ar.conjugacy_residual);
    rep.pass = rep.pass && ar.gap_ok && ar.monotone_ok && ar.limit_ok;
    rep.atoms.push_back(std::move(ar));
  }
  return rep;
}

}  // namespace dlab
