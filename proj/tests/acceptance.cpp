// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "duality_lab/analysis_toolkit.hpp"
#include "duality_lab/conditional_duality.hpp"
#include "duality_lab/errors.hpp"
#include "duality_lab/experiment.hpp"
#include "duality_lab/minimax_bridge.hpp"
#include "duality_lab/stability_lab.hpp"
#include "fixtures.hpp"

namespace dlab {
namespace {

namespace fs = std::filesystem;

// Pinned thresholds.
constexpr double kConjugacy32 = 2e-3;
constexpr double kConjugacy128 = 2e-4;
constexpr double kDualRelation = 1e-6;
constexpr double kDerivative = 1e-4;
constexpr double kLogValue = 0.00502517;
constexpr double kLogValueTol = 1e-6;
constexpr double kDensityTol = 1e-9;
constexpr double kMartingale = 1e-7;
constexpr double kLocality = 1e-10;
constexpr double kStability = 1e-3;
constexpr double kUniform = 2e-3;
constexpr double kGapFloor = -1e-12;
constexpr double kGapCeiling = 0.05;
constexpr double kHalvingLo = 0.4;
constexpr double kHalvingHi = 0.6;
constexpr double kNetRadius = 1e-2;
constexpr std::size_t kNetSamples = 10000;
constexpr std::uint64_t kSeed = 20240601;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Fixture {
  std::string name;
  MarketModel market;
};

std::vector<Fixture> fixtures() {
  return {{"fix-a", testing::fix_a()},
          {"fix-b", testing::fix_b()},
          {"fix-c", testing::fix_c()},
          {"two-period-b", testing::two_period_b()},
          {"two-period-trinomial", testing::two_period_trinomial()}};
}

std::vector<std::pair<std::string, UtilityPair>> utilities() {
  return {{"log", UtilityPair::log()}, {"power(0.5)", UtilityPair::power(0.5)}};
}

RandomVariable ones(const MarketModel& m) { return RandomVariable(m.space().size(), 1.0); }

Outcome conjugacy() {
  double raw32 = 0.0, raw128 = 0.0, refined = 0.0;
  std::string worst;
  for (const auto& f : fixtures()) {
    if (f.name == "two-period-b") continue;  // the trinomial covers the two-period case
    const int horizon = f.market.horizon();
    std::vector<int> times{0, 1, horizon};
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    for (int t : times) {
      const StoppingTime tau = StoppingTime::constant(f.market.space().size(), t);
      const ConjugacyReport c32 = conjugacy_check(f.market, UtilityPair::log(), tau, {0.5, 1.0, 2.0}, 32);
      const ConjugacyReport c128 = conjugacy_check(f.market, UtilityPair::log(), tau, {0.5, 1.0, 2.0}, 128);
      if (c32.max_residual > raw32) worst = fmt::format("{} tau={}", f.name, t);
      raw32 = std::max(raw32, c32.max_residual);
      raw128 = std::max(raw128, c128.max_residual);
      refined = std::max({refined, c32.max_refined_residual, c128.max_refined_residual});
    }
  }
  return {raw32 <= kConjugacy32 && raw128 <= kConjugacy128,
          fmt::format("raw residual {:.3e} at 32 points (<= {:g}), {:.3e} at 128 points (<= {:g}); worst {}; "
                      "refined {:.1e}",
                      raw32, kConjugacy32, raw128, kConjugacy128, worst, refined)};
}

Outcome dual_relation() {
  double worst = 0.0;
  std::string where;
  for (const auto& f : fixtures()) {
    for (const auto& [uname, u] : utilities()) {
      for (int t : {0, 1}) {
        const StoppingTime tau = StoppingTime::constant(f.market.space().size(), t);
        const DualRelationReport r = dual_relation_check(f.market, u, tau, ones(f.market));
        if (r.max_residual >= worst) where = fmt::format("{} {} tau={}", f.name, uname, t);
        worst = std::max(worst, r.max_residual);
      }
    }
  }
  return {worst <= kDualRelation, fmt::format("max relative residual {:.3e} (<= {:g}) at {}", worst, kDualRelation, where)};
}

Outcome derivative() {
  double worst = 0.0;
  std::string where;
  for (const auto& f : fixtures()) {
    for (const auto& [uname, u] : utilities()) {
      for (double eta : {0.5, 1.0, 2.0}) {
        const StoppingTime tau = StoppingTime::constant(f.market.space().size(), 0);
        const DerivativeReport d =
            dual_derivative(f.market, u, tau, RandomVariable(f.market.space().size(), eta));
        if (d.max_rel_gap >= worst) where = fmt::format("{} {} eta={}", f.name, uname, eta);
        worst = std::max(worst, d.max_rel_gap);
      }
    }
  }
  return {worst <= kDerivative, fmt::format("max relative gap {:.3e} (<= {:g}) at {}", worst, kDerivative, where)};
}

Outcome closed_form_log() {
  const MarketModel m = testing::fix_b();
  const UtilityPair u = UtilityPair::log();
  const StoppingTime tau = StoppingTime::constant(2, 0);
  // Oracle first: exhaustive position search, log-optimal Z_T = 1 / X_T.
  const OracleResult o = brute_force_oracle(m, u, tau, ones(m), {1e-5, 4, 5e7});
  const double z_oracle_up = 1.0 / o.X_T[0], z_oracle_dn = 1.0 / o.X_T[1];
  const bool oracle_ok = std::abs(o.atom_values[0] - kLogValue) <= kLogValueTol &&
                         std::abs(z_oracle_up - 0.9) <= kDensityTol && std::abs(z_oracle_dn - 1.1) <= kDensityTol;
  if (!oracle_ok) {
    return {false, fmt::format("oracle u0 {:.9f}, Z ({:.12f}, {:.12f}); solver not trusted", o.atom_values[0],
                               z_oracle_up, z_oracle_dn)};
  }
  const DualityResult p = primal_solve(m, u, tau, ones(m));
  const DualityResult d = dual_solve(m, u, tau, ones(m));
  const double value_err = std::abs(p.atom_values_u[0] - kLogValue);
  const double oracle_gap = std::abs(p.atom_values_u[0] - o.atom_values[0]);
  const double z_err = std::max(std::abs(d.Y_hat[0] - 0.9), std::abs(d.Y_hat[1] - 1.1));
  const double z_vs_oracle = std::max(std::abs(d.Y_hat[0] - z_oracle_up), std::abs(d.Y_hat[1] - z_oracle_dn));
  return {value_err <= kLogValueTol && z_err <= kDensityTol && z_vs_oracle <= kDensityTol,
          fmt::format("oracle u0 {:.9f}; solver u0 {:.9f} (|err| {:.1e}, vs oracle {:.1e}); Z ({:.12f}, {:.12f}) "
                      "|err| {:.1e} (<= {:g})",
                      o.atom_values[0], p.atom_values_u[0], value_err, oracle_gap, d.Y_hat[0], d.Y_hat[1], z_err,
                      kDensityTol)};
}

Outcome martingale() {
  const ValueProcessReport r = value_process(testing::two_period_b(), UtilityPair::log(), 1.0);
  return {r.max_martingale_residual <= kMartingale,
          fmt::format("max node residual {:.3e} (<= {:g}); terminal gap {:.1e}", r.max_martingale_residual,
                      kMartingale, r.max_terminal_gap)};
}

Outcome locality() {
  double worst = 0.0;
  for (const auto& f : {Fixture{"two-period-b", testing::two_period_b()},
                        Fixture{"two-period-trinomial", testing::two_period_trinomial()}}) {
    const FilteredSpace& sp = f.market.space();
    const StoppingTime tau = StoppingTime::constant(sp.size(), 1);
    const SigmaAlgebra atoms = sp.sigma_at(tau);
    const std::vector<double> levels{0.5, 1.0, 2.0};
    std::vector<double> per_atom(atoms.size());
    for (std::size_t a = 0; a < atoms.size(); ++a) per_atom[a] = levels[a % levels.size()];
    const RandomVariable spliced = atoms.lift(per_atom);
    for (const auto& u : {UtilityPair::log(), UtilityPair::power(0.5)}) {
      const DualityResult whole = dual_solve(f.market, u, tau, spliced);
      const DualityResult primal_whole = primal_solve(f.market, u, tau, spliced);
      for (std::size_t a = 0; a < atoms.size(); ++a) {
        const RandomVariable flat(sp.size(), per_atom[a]);
        const DualityResult piece = dual_solve(f.market, u, tau, flat);
        const DualityResult primal_piece = primal_solve(f.market, u, tau, flat);
        worst = std::max(worst, std::abs(whole.atom_values_v[a] - piece.atom_values_v[a]));
        worst = std::max(worst, std::abs(primal_whole.atom_values_u[a] - primal_piece.atom_values_u[a]));
        for (int s : atoms.atom(a).scenarios) {
          const auto i = static_cast<std::size_t>(s);
          worst = std::max(worst, std::abs(whole.Y_hat[i] - piece.Y_hat[i]));
          worst = std::max(worst, std::abs(primal_whole.X_hat[i] - primal_piece.X_hat[i]));
        }
      }
    }
  }
  return {worst <= kLocality, fmt::format("max abs splice gap {:.3e} (<= {:g})", worst, kLocality)};
}

MarketSequence stability_sequence() {
  return MarketSequence(testing::two_period_b(), {RandomVariable(4, 1.0), RandomVariable(4, 1.0)},
                        DecayKind::kInverse, 64);
}

Outcome stability() {
  const MarketSequence seq = stability_sequence();
  StabilityOptions opts;
  opts.tolerance = kStability;
  const StabilityReport r = run_stability_experiment(seq, UtilityPair::log(), StoppingTime::constant(4, 1),
                                                     RandomVariable(4, 1.0), RandomVariable(4, 1.0), opts);
  bool ok = true;
  std::string cols;
  for (std::size_t c = 0; c < r.columns.size(); ++c) {
    const double last = column_value(r.rows.back(), r.columns[c]);
    const bool col_ok = r.column_monotone[c] && last <= kStability;
    ok = ok && col_ok;
    cols += fmt::format(" {}={:.2e}{}{}", r.columns[c], last, r.column_monotone[c] ? "" : " (not monotone)",
                        col_ok ? "" : " FAIL");
  }
  return {ok, fmt::format("n=64, <= {:g}:{}", kStability, cols)};
}

Outcome uniform() {
  const MarketSequence seq = stability_sequence();
  const MarketModel& base = seq.base();
  const StoppingTime tau = StoppingTime::constant(4, 1);
  const ConvexCompactSet k = ConvexCompactSet::order_interval(base.space(), base.space().sigma_at(tau),
                                                              RandomVariable(4, 0.5), RandomVariable(4, 2.0));
  const UniformConvergenceReport r = uniform_convergence_on_set(seq, UtilityPair::log(), tau, k, kNetRadius, kUniform);
  const double gv = r.sup_gap_v.back(), gd = r.sup_gap_vprime.back();
  return {gv <= kUniform && gd <= kUniform && r.lipschitz_ok,
          fmt::format("sup gap v {:.3e}, v' {:.3e} (<= {:g}); alpha {:.3f} >= max slope {:.3f}; {} points", gv, gd,
                      kUniform, r.alpha, r.max_observed_slope, r.points)};
}

Outcome minimax() {
  const MarketModel m = testing::fix_c();
  const MinimaxReport r =
      reconcile_minimax(m, UtilityPair::log(), StoppingTime::constant(3, 0), RandomVariable(3, 1.0), {0.01, 0.005});
  const MinimaxAtomReport& a = r.atoms[0];
  const std::size_t per_step = r.truncations.size();
  const double gap_coarse = a.cells[per_step - 1].result.gap;
  const double halving = a.halving_ratio.empty() ? std::nan("") : a.halving_ratio[0];
  bool floor_ok = true;
  for (const auto& atom : r.atoms) floor_ok = floor_ok && atom.min_gap >= kGapFloor;
  const bool halving_ok = halving >= kHalvingLo && halving <= kHalvingHi;
  return {floor_ok && gap_coarse <= kGapCeiling && halving_ok && a.monotone_ok,
          fmt::format("min gap {:.1e} (>= {:g}); gap at 0.01 {:.1e} (<= {:g}); halving factor {} (in [{:g}, {:g}]); "
                      "truncation monotone {}; |v~ - v| {:.1e}",
                      a.min_gap, kGapFloor, gap_coarse, kGapCeiling,
                      std::isnan(halving) ? std::string("undefined (0/0)") : fmt::format("{:.3f}", halving), kHalvingLo,
                      kHalvingHi, a.monotone_ok ? "yes" : "no", a.limit_error)};
}

Outcome nets() {
  std::size_t violations = 0, samples = 0, points = 0;
  double max_distance = 0.0;
  auto certify = [&](const ConvexCompactSet& k) {
    const auto convex = ftau_convex_net(k, kNetRadius);
    const auto sub = partition_subconvex_net(k, kNetRadius);
    for (const auto& [net, kind] : {std::pair{&convex, HullKind::kConvex}, std::pair{&sub, HullKind::kPartitionSub}}) {
      const CoverCertificate c = net_cover_certificate(k, *net, kNetRadius, kind, kNetSamples, kSeed);
      violations += c.violations;
      samples += c.samples;
      max_distance = std::max(max_distance, c.max_distance);
      points += net->size();
    }
  };
  const MarketModel two = testing::two_period_b();
  const SigmaAlgebra g2 = two.space().sigma_at(StoppingTime::constant(4, 1));
  certify(ConvexCompactSet::order_interval(two.space(), g2, RandomVariable(4, 0.5), RandomVariable(4, 2.0)));
  const MarketModel tri = testing::two_period_trinomial();
  const SigmaAlgebra g3 = tri.space().sigma_at(StoppingTime::constant(9, 1));
  certify(ConvexCompactSet::from_generators(
      tri.space(), g3,
      {g3.lift(std::vector<double>{0.2, 1.0, 3.0}), g3.lift(std::vector<double>{1.5, 0.4, 2.0})}));
  return {violations == 0,
          fmt::format("{} samples, {} violations, max distance {:.2e} (r = {:g}), {} net points", samples, violations,
                      max_distance, kNetRadius, points)};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "duality_lab_acceptance";
  fs::remove_all(root);
  std::vector<fs::path> configs;
  for (const auto& e : fs::directory_iterator(DUALITY_LAB_CONFIG_DIR)) {
    if (e.is_regular_file() && e.path().extension() == ".json") configs.push_back(e.path());
  }
  std::sort(configs.begin(), configs.end());
  std::size_t mismatches = 0;
  std::string bad;
  for (const auto& path : configs) {
    const ParseResult parsed = load_config(path.string());
    if (!parsed.config) {
      ++mismatches;
      bad += " " + path.filename().string() + "(parse)";
      continue;
    }
    std::string json[2], csv[2];
    for (int i = 0; i < 2; ++i) {
      RunOptions opts;
      opts.jobs = i == 0 ? 1 : 8;
      opts.out_dir = (root / path.stem() / fmt::format("jobs{}", opts.jobs)).string();
      const RunOutcome out = run_experiment(*parsed.config, opts);
      json[i] = out.json;
      csv[i] = out.csv;
    }
    if (json[0] != json[1] || csv[0] != csv[1] || json[0].empty()) {
      ++mismatches;
      bad += " " + path.filename().string();
    }
  }
  return {mismatches == 0, fmt::format("{} configs run with --jobs 1 and 8, {} differing{}", configs.size(), mismatches,
                                       bad.empty() ? "" : ":" + bad)};
}

}  // namespace
}  // namespace dlab

int main() {
  using dlab::Outcome;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"conjugacy", dlab::conjugacy},
      {"dual relation", dlab::dual_relation},
      {"derivative formula", dlab::derivative},
      {"closed-form log market", dlab::closed_form_log},
      {"value-process martingale", dlab::martingale},
      {"locality", dlab::locality},
      {"stability", dlab::stability},
      {"uniform convergence", dlab::uniform},
      {"conditional minimax", dlab::minimax},
      {"net constructions", dlab::nets},
      {"determinism", dlab::determinism}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failed;
    fmt::print("{} {:>2} {}: {} [{:.2f} s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail, secs);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
