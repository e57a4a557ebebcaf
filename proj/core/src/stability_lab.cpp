#include "duality_lab/stability_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "duality_lab/errors.hpp"

namespace dlab {

namespace {

constexpr const char* kModule = "stability_lab";
constexpr double kInf = std::numeric_limits<double>::infinity();

bool nonincreasing_from(const std::vector<double>& xs, std::size_t start) {
  for (std::size_t i = start + 1; i < xs.size(); ++i) {
    if (xs[i] > xs[i - 1] * (1.0 + 1e-9) + 1e-11) return false;
  }
  return true;
}

SolveOptions without_pool(SolveOptions o) {
  o.pool = nullptr;
  return o;
}

void run_indexed(const WorkerPool* pool, std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (pool != nullptr) {
    pool->parallel_for(n, fn);
  } else {
    for (std::size_t i = 0; i < n; ++i) fn(i);
  }
}

}  // namespace

MarketSequence::MarketSequence(MarketModel base, std::vector<RandomVariable> delta, DecayKind decay, int n_max,
                               std::vector<double> table)
    : base_(std::move(base)), delta_(std::move(delta)), decay_(decay), n_max_(n_max), table_(std::move(table)) {
  if (n_max_ < 1) throw InvalidInput(kModule, "sequence length must be at least 1");
  if (static_cast<int>(delta_.size()) != base_.horizon()) {
    throw InvalidInput(kModule, fmt::format("delta: expected {} periods, got {}", base_.horizon(), delta_.size()));
  }
  if (decay_ == DecayKind::kTable && static_cast<int>(table_.size()) < n_max_) {
    throw InvalidInput(kModule, fmt::format("decay table has {} entries, need {}", table_.size(), n_max_));
  }
  // Predictability of delta is checked by building a shifted market.
  (void)shifted(0.0);
}

double MarketSequence::g(int n) const {
  if (n < 1) throw InvalidInput(kModule, "sequence index starts at 1");
  switch (decay_) {
    case DecayKind::kInverse:
      return 1.0 / n;
    case DecayKind::kInverseSquare:
      return 1.0 / (static_cast<double>(n) * n);
    case DecayKind::kTable:
      return table_.at(static_cast<std::size_t>(n - 1));
  }
  return 0.0;
}

MarketModel MarketSequence::shifted(double c) const {
  std::vector<RandomVariable> lam;
  for (int t = 1; t <= base_.horizon(); ++t) lam.push_back(base_.lam(t) + c * delta_[static_cast<std::size_t>(t - 1)]);
  return base_.with_drift(std::move(lam));
}

MarketModel MarketSequence::at(int n) const { return shifted(g(n)); }

VCompactnessReport v_compactness_check(const MarketSequence& seq, const UtilityPair& u) {
  VCompactnessReport rep;
  double running = 0.0;
  for (int n = 1; n <= seq.n_max(); ++n) {
    double moment = kInf;
    try {
      const MarketModel m = seq.at(n);
      const RandomVariable z = build_density(m).back();
      moment = 0.0;
      for (std::size_t s = 0; s < z.size(); ++s) {
        const double v = u.V(z[s]);
        moment += m.space().prob()[s] * v * v;
      }
    } catch (const ModelError& e) {
      if (rep.note.empty()) rep.note = fmt::format("n={}: {}", n, e.what());
    }
    if (!std::isfinite(moment)) rep.unbounded = true;
    rep.moments.push_back(moment);
    running = std::max(running, moment);
    rep.running_sup.push_back(running);
  }
  rep.bound = running;
  const std::size_t k = rep.running_sup.size();
  if (k >= 2 && std::isfinite(running)) {
    rep.last_ratio = rep.running_sup[k - 2] > 0.0 ? rep.running_sup[k - 1] / rep.running_sup[k - 2] : 1.0;
  }
  if (rep.last_ratio > 1.05) rep.unbounded = true;
  rep.pass = !rep.unbounded && std::isfinite(rep.bound);
  return rep;
}

ConvergenceReport appropriate_convergence_check(const MarketSequence& seq) {
  const FilteredSpace& sp = seq.base().space();
  const RandomVariable z0 = build_density(seq.base()).back();
  const double h = 1e-6;
  const RandomVariable zp = build_density(seq.shifted(h)).back();
  const RandomVariable zm = build_density(seq.shifted(-h)).back();
  double sensitivity = 0.0;
  for (std::size_t s = 0; s < sp.size(); ++s) {
    sensitivity += sp.prob()[s] * std::min(std::abs(zp[s] - zm[s]) / (2.0 * h), 1.0);
  }
  ConvergenceReport rep;
  for (int n = 1; n <= seq.n_max(); ++n) {
    rep.distances.push_back(ky_fan(sp, build_density(seq.at(n)).back(), z0));
    rep.predicted.push_back(std::abs(seq.g(n)) * sensitivity);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (int n = 4; n <= seq.n_max(); ++n) {
    const double d = rep.distances[static_cast<std::size_t>(n - 1)];
    if (!(d > 0.0)) continue;
    const double lx = std::log(static_cast<double>(n));
    const double ly = std::log(d);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++cnt;
  }
  if (cnt >= 2) rep.slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  const double last = rep.distances.back();
  const double pred = rep.predicted.back();
  rep.prediction_ratio = pred > 0.0 ? last / pred : (last == 0.0 ? 1.0 : kInf);
  rep.monotone = nonincreasing_from(rep.distances, 3);
  const bool vanished = last <= 1e-6;
  rep.pass = vanished || (rep.monotone && rep.slope < 0.0);
  return rep;
}

namespace {

struct MarketSnapshot {
  RandomVariable z_T;
  RandomVariable x_T;         // normalized optimal terminal wealth, time-0 problem
  RandomVariable x_tau;       // its value at tau
  std::vector<double> u_tau;  // per atom
  std::vector<double> v_tau;
  std::vector<double> vprime_tau;
  std::vector<double> ucp;    // u_t(X_t) per node
};

MarketSnapshot snapshot(const MarketModel& m, const UtilityPair& u, const StoppingTime& tau, const RandomVariable& xi,
                        const RandomVariable& eta, double x0, const SolveOptions& opts) {
  const FilteredSpace& sp = m.space();
  MarketSnapshot s;
  s.z_T = build_density(m).back();
  const DualityResult p0 = primal_solve(m, u, StoppingTime::constant(sp.size(), 0), RandomVariable(sp.size(), x0), opts);
  s.x_T = p0.X_hat;
  s.x_tau = RandomVariable(sp.size());
  for (std::size_t w = 0; w < sp.size(); ++w) {
    s.x_tau[w] = p0.node_wealth[static_cast<std::size_t>(sp.node_of(tau[w], static_cast<int>(w)))];
  }
  s.u_tau = primal_solve(m, u, tau, xi, opts).atom_values_u;
  const DualityResult d = dual_solve(m, u, tau, eta, opts);
  s.v_tau = d.atom_values_v;
  s.vprime_tau = d.v_prime;
  s.ucp = value_process(m, u, x0, opts).node_value;
  return s;
}

double max_abs_gap(const std::vector<double>& a, const std::vector<double>& b) {
  double g = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) g = std::max(g, std::abs(a[i] - b[i]));
  return g;
}

}  // namespace

double column_value(const StabilityRow& row, const std::string& column) {
  if (column == "dZ") return row.dZ;
  if (column == "dXT") return row.dXT;
  if (column == "dXtau") return row.dXtau;
  if (column == "du") return row.du;
  if (column == "dv") return row.dv;
  if (column == "dvprime") return row.dvprime;
  if (column == "ducp") return row.ducp;
  throw InvalidInput(kModule, fmt::format("unknown stability column '{}'", column));
}

StabilityReport run_stability_experiment(const MarketSequence& seq, const UtilityPair& u, const StoppingTime& tau,
                                         const RandomVariable& xi, const RandomVariable& eta,
                                         const StabilityOptions& opts) {
  const FilteredSpace& sp = seq.base().space();
  const SolveOptions inner = without_pool(opts.solve);
  const MarketSnapshot base = snapshot(seq.base(), u, tau, xi, eta, opts.x0, inner);
  const auto n_max = static_cast<std::size_t>(seq.n_max());
  StabilityReport rep;
  rep.tolerance = opts.tolerance;
  rep.rows.resize(n_max);
  run_indexed(opts.solve.pool, n_max, [&](std::size_t i) {
    const int n = static_cast<int>(i) + 1;
    try {
      const RandomVariable xi_n = opts.joint_xi ? xi * (1.0 + 1.0 / n) : xi;
      const MarketModel m = seq.at(n);
      const MarketSnapshot s = snapshot(m, u, tau, xi_n, eta, opts.x0, inner);
      StabilityRow& row = rep.rows[i];
      row.n = n;
      row.dZ = ky_fan(sp, s.z_T, base.z_T);
      row.dXT = ky_fan(sp, s.x_T, base.x_T);
      row.dXtau = ky_fan(sp, s.x_tau, base.x_tau);
      row.du = max_abs_gap(s.u_tau, base.u_tau);
      row.dv = max_abs_gap(s.v_tau, base.v_tau);
      row.dvprime = max_abs_gap(s.vprime_tau, base.vprime_tau);
      row.ducp = max_abs_gap(s.ucp, base.ucp);
      for (std::size_t w = 0; w < sp.size(); ++w) {
        row.dU_l1 += sp.prob()[w] * std::abs(u.U(opts.x0 * s.x_T[w]) - u.U(opts.x0 * base.x_T[w]));
      }
      for (std::size_t a = 0; a < s.v_tau.size(); ++a) {
        row.v_excess = std::max(row.v_excess, s.v_tau[a] - base.v_tau[a]);
      }
    } catch (const Error& e) {
      throw SolverError(kModule, fmt::format("stability run failed at n={}: {}", n, e.what()));
    }
  });
  rep.min_value = kInf;
  for (double v : base.v_tau) rep.min_value = std::min(rep.min_value, v);
  for (const auto& row : rep.rows) {
    if (row.v_excess > row.dv + 1e-15) rep.usc_ok = false;
  }
  rep.columns = {"dZ", "dXT", "dXtau", "du", "dv", "dvprime"};
  const auto start = static_cast<std::size_t>(std::max(opts.burn_in, 1) - 1);
  for (const auto& c : rep.columns) {
    std::vector<double> col;
    for (const auto& row : rep.rows) col.push_back(column_value(row, c));
    const bool mono = nonincreasing_from(col, std::min(start, col.size() - 1));
    const bool final_ok = col.back() <= opts.tolerance;
    rep.column_monotone.push_back(mono);
    rep.column_final_ok.push_back(final_ok);
    rep.pass = rep.pass && mono && final_ok;
  }
  rep.pass = rep.pass && rep.usc_ok;
  return rep;
}

UniformConvergenceReport uniform_convergence_on_set(const MarketSequence& seq, const UtilityPair& u,
                                                    const StoppingTime& tau, const ConvexCompactSet& k, double r,
                                                    double tolerance, const SolveOptions& opts) {
  const FilteredSpace& sp = seq.base().space();
  const SigmaAlgebra atoms = sp.sigma_at(tau);
  if (atoms.size() != k.atoms()) throw InvalidInput(kModule, "K must be built on the atoms of F_tau");
  for (double lo : k.lower()) {
    if (!(lo > 0.0)) throw InvalidInput(kModule, "K touches 0; it must lie in L0_++ bounded away from 0");
  }
  if (!(r > 0.0)) throw InvalidInput(kModule, "net radius must be positive");
  const auto net_c = ftau_convex_net(k, r);
  const auto net_s = partition_subconvex_net(k, r);

  // Per atom: the r-spaced grid of the interval plus every net value.
  std::vector<std::vector<double>> pts(k.atoms());
  std::vector<double> eps(k.atoms());
  UniformConvergenceReport rep;
  rep.tolerance = tolerance;
  for (std::size_t a = 0; a < k.atoms(); ++a) {
    const double lo = k.lower()[a];
    const double hi = k.upper()[a];
    for (double c = lo; c < hi + 1e-12; c += r) pts[a].push_back(std::min(c, hi));
    pts[a].push_back(hi);
    for (const auto* net : {&net_c, &net_s}) {
      for (const auto& x : *net) pts[a].push_back(k.sigma().atom_values(x)[a]);
    }
    std::sort(pts[a].begin(), pts[a].end());
    pts[a].erase(std::unique(pts[a].begin(), pts[a].end(),
                             [](double x, double y) { return std::abs(x - y) <= 1e-12; }),
                 pts[a].end());
    eps[a] = std::min(0.25, 0.5 * lo);
    rep.points += pts[a].size();
  }

  const auto n_max = static_cast<std::size_t>(seq.n_max());
  // values[n][a][j], slopes, and the two Lipschitz anchors per (n, atom).
  std::vector<std::vector<std::vector<double>>> val(n_max + 1), der(n_max + 1);
  std::vector<std::vector<double>> anchor_lo(n_max + 1), anchor_hi(n_max + 1);
  const SolveOptions inner = without_pool(opts);
  run_indexed(opts.pool, n_max + 1, [&](std::size_t n) {
    const MarketModel m = n == 0 ? seq.base() : seq.at(static_cast<int>(n));
    val[n].resize(k.atoms());
    der[n].resize(k.atoms());
    anchor_lo[n].resize(k.atoms());
    anchor_hi[n].resize(k.atoms());
    for (std::size_t a = 0; a < k.atoms(); ++a) {
      const int root = atoms.atom(a).node;
      for (double c : pts[a]) {
        const NodeDual d = solve_dual_at_node(m, u, root, c, inner);
        val[n][a].push_back(d.value);
        der[n][a].push_back(d.vprime);
      }
      anchor_lo[n][a] = solve_dual_at_node(m, u, root, k.lower()[a] - eps[a], inner).value;
      anchor_hi[n][a] = solve_dual_at_node(m, u, root, k.upper()[a] + eps[a], inner).value;
    }
  });

  rep.lower_bound = kInf;
  for (std::size_t a = 0; a < k.atoms(); ++a) {
    double top = -kInf, bottom = kInf;
    for (std::size_t n = 0; n <= n_max; ++n) {
      top = std::max(top, anchor_lo[n][a]);
      bottom = std::min(bottom, anchor_hi[n][a]);
    }
    rep.alpha = std::max(rep.alpha, (top - bottom) / eps[a]);
  }
  for (std::size_t n = 0; n <= n_max; ++n) {
    double gv = 0.0, gd = 0.0;
    for (std::size_t a = 0; a < k.atoms(); ++a) {
      const auto& v = val[n][a];
      for (std::size_t j = 0; j < v.size(); ++j) {
        gv = std::max(gv, std::abs(v[j] - val[0][a][j]));
        gd = std::max(gd, std::abs(der[n][a][j] - der[0][a][j]));
        rep.lower_bound = std::min(rep.lower_bound, v[j]);
        for (std::size_t i = 0; i < j; ++i) {
          const double slope = std::abs(v[j] - v[i]) / (pts[a][j] - pts[a][i]);
          rep.max_observed_slope = std::max(rep.max_observed_slope, slope);
        }
      }
    }
    if (n > 0) {
      rep.sup_gap_v.push_back(gv);
      rep.sup_gap_vprime.push_back(gd);
    }
  }
  rep.lipschitz_ok = rep.max_observed_slope <= rep.alpha * (1.0 + 1e-9);
  rep.pass = rep.lipschitz_ok && rep.sup_gap_v.back() <= tolerance && rep.sup_gap_vprime.back() <= tolerance;
  return rep;
}

}  // namespace dlab
