#include "duality_lab/conditional_duality.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>

#include "duality_lab/errors.hpp"

namespace dlab {

namespace {

constexpr const char* kModule = "conditional_duality";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Subtree {
  std::vector<int> nodes;     // breadth-first, root first
  std::vector<int> depth;     // per local index
  std::vector<int> parent;    // local index of the parent, -1 at the root
  std::vector<int> var;       // primal variable of an internal node, else -1
  std::vector<int> internal;  // local indices of internal nodes
  std::vector<int> leaves;    // local indices of terminal nodes
};

Subtree make_subtree(const MarketModel& m, int root) {
  const FilteredSpace& sp = m.space();
  Subtree st;
  st.nodes = subtree_nodes(sp, root);
  std::vector<int> local(sp.nodes().size(), -1);
  for (std::size_t i = 0; i < st.nodes.size(); ++i) local[static_cast<std::size_t>(st.nodes[i])] = static_cast<int>(i);
  st.depth.assign(st.nodes.size(), 0);
  st.parent.assign(st.nodes.size(), -1);
  st.var.assign(st.nodes.size(), -1);
  for (std::size_t i = 0; i < st.nodes.size(); ++i) {
    const Node& node = sp.node(st.nodes[i]);
    if (node.parent >= 0 && i > 0) {
      const int p = local[static_cast<std::size_t>(node.parent)];
      st.parent[i] = p;
      st.depth[i] = st.depth[static_cast<std::size_t>(p)] + 1;
    }
    if (node.t < m.horizon()) {
      st.var[i] = static_cast<int>(st.internal.size());
      st.internal.push_back(static_cast<int>(i));
    } else {
      st.leaves.push_back(static_cast<int>(i));
    }
  }
  return st;
}

int local_index(const Subtree& st, int node) {
  const auto it = std::find(st.nodes.begin(), st.nodes.end(), node);
  return static_cast<int>(it - st.nodes.begin());
}

// Strictly positive martingale density per node id (Q(n) / P(n)).
std::vector<double> node_density(const MarketModel& m) {
  const FilteredSpace& sp = m.space();
  std::vector<double> out(sp.nodes().size(), 1.0);
  try {
    const auto z = build_density(m);
    for (std::size_t id = 0; id < sp.nodes().size(); ++id) {
      const Node& node = sp.nodes()[id];
      out[id] = z[static_cast<std::size_t>(node.t)][static_cast<std::size_t>(node.scenarios.front())];
    }
    return out;
  } catch (const ModelError&) {
  }
  const auto q = equivalent_martingale_measure(m);
  if (!q) throw ModelError(kModule, "NFLVR check failed: no strictly positive martingale density");
  for (std::size_t id = 0; id < sp.nodes().size(); ++id) {
    const Node& node = sp.nodes()[id];
    double mass = 0.0;
    for (int s : node.scenarios) mass += (*q)[static_cast<std::size_t>(s)];
    out[id] = mass / node.prob;
  }
  return out;
}

void require_measurable_positive(const FilteredSpace& sp, const SigmaAlgebra& g, const RandomVariable& x,
                                 const char* name) {
  if (x.size() != sp.size()) {
    throw InvalidInput(kModule, fmt::format("{} needs {} entries, got {}", name, sp.size(), x.size()));
  }
  for (double v : x) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput(kModule, fmt::format("{} must be finite and > 0", name));
  }
  if (!g.is_measurable(x, 0.0)) throw InvalidInput(kModule, fmt::format("{} is not F_tau-measurable", name));
}

template <typename Fn>
void for_each_atom(const SolveOptions& opts, std::size_t n, Fn&& fn) {
  if (opts.pool != nullptr) {
    opts.pool->parallel_for(n, fn);
  } else {
    for (std::size_t i = 0; i < n; ++i) fn(i);
  }
}

std::vector<RandomVariable> node_values_to_path(const FilteredSpace& sp, const StoppingTime& tau,
                                                const std::vector<double>& per_node) {
  std::vector<RandomVariable> path;
  for (int t = 0; t <= sp.horizon(); ++t) {
    RandomVariable x(sp.size(), 1.0);
    for (std::size_t s = 0; s < sp.size(); ++s) {
      if (t > tau[s]) x[s] = per_node[static_cast<std::size_t>(sp.node_of(t, static_cast<int>(s)))];
    }
    path.push_back(std::move(x));
  }
  return path;
}

}  // namespace

NodePrimal solve_primal_at_node(const MarketModel& m, const UtilityPair& u, int root, double xi,
                                const SolveOptions& opts) {
  if (!(xi > 0.0) || !std::isfinite(xi)) throw InvalidInput(kModule, "initial wealth must be finite and > 0");
  const FilteredSpace& sp = m.space();
  const Subtree st = make_subtree(m, root);
  NodePrimal out;
  out.nodes = st.nodes;
  if (st.internal.empty()) {
    out.value = u.U(xi);
    out.uprime = u.Uprime(xi);
    out.wealth = {xi};
    return out;
  }
  const auto k = static_cast<Eigen::Index>(st.nodes.size());
  const auto nv = static_cast<Eigen::Index>(st.internal.size());
  // Row i: wealth at local node i minus xi, as a linear map of the holdings.
  Eigen::MatrixXd paths = Eigen::MatrixXd::Zero(k, nv);
  for (int i : st.internal) {
    const NodeStep& step = m.step(st.nodes[static_cast<std::size_t>(i)]);
    for (std::size_t c = 0; c < step.children.size(); ++c) {
      const int lc = local_index(st, step.children[c]);
      paths.row(lc) = paths.row(i);
      paths(lc, st.var[static_cast<std::size_t>(i)]) += step.dS[c];
    }
  }
  const double root_prob = sp.node(root).prob;
  SeparableObjective f;
  f.A.resize(static_cast<Eigen::Index>(st.leaves.size()), nv);
  f.b = Eigen::VectorXd::Constant(f.A.rows(), xi);
  f.w.resize(f.A.rows());
  for (std::size_t j = 0; j < st.leaves.size(); ++j) {
    const auto lj = static_cast<Eigen::Index>(st.leaves[j]);
    f.A.row(static_cast<Eigen::Index>(j)) = paths.row(lj);
    f.w(static_cast<Eigen::Index>(j)) = sp.node(st.nodes[static_cast<std::size_t>(lj)]).prob / root_prob;
  }
  f.phi = [&u](double z) { return z > 0.0 ? -u.U(z) : kInf; };
  f.dphi = [&u](double z) { return -u.Uprime(z); };
  f.d2phi = [&u](double z) { return -u.Uprime2(z); };
  const Eigen::MatrixXd G = -paths.bottomRows(k - 1);
  const Eigen::VectorXd h = Eigen::VectorXd::Constant(k - 1, xi);
  BarrierOptions bopts = opts.barrier;
  bopts.unbounded_norm = opts.barrier.unbounded_norm * std::max(1.0, xi);
  const BarrierResult res = minimize_with_barrier(f, G, h, Eigen::VectorXd::Zero(nv), bopts);
  if (res.status == BarrierStatus::kUnbounded) {
    throw SolverError(kModule, fmt::format("primal unbounded at node {} (t={})", root, sp.node(root).t));
  }
  const Eigen::VectorXd wealth = (paths * res.x).array() + xi;
  out.wealth.assign(wealth.data(), wealth.data() + wealth.size());
  out.value = -res.objective;
  out.kkt = res.kkt_residual;
  for (std::size_t j = 0; j < st.leaves.size(); ++j) {
    const double w = f.w(static_cast<Eigen::Index>(j));
    const double x = out.wealth[static_cast<std::size_t>(st.leaves[j])];
    out.uprime += w * (x / xi) * u.Uprime(x);
  }
  return out;
}

NodeDual solve_dual_at_node(const MarketModel& m, const UtilityPair& u, int root, double eta,
                            const SolveOptions& opts) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidInput(kModule, "dual multiplier must be finite and > 0");
  const FilteredSpace& sp = m.space();
  const Subtree st = make_subtree(m, root);
  NodeDual out;
  out.nodes = st.nodes;
  if (st.internal.empty()) {
    out.value = u.V(eta);
    out.vprime = -u.I(eta);
    out.deflator = {1.0};
    return out;
  }
  const auto k = static_cast<Eigen::Index>(st.nodes.size());
  const Eigen::Index nv = k - 1;  // Y at every non-root node; variable = local index - 1
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  for (int i : st.internal) {
    for (const auto& row : deflator_rows(m, st.nodes[static_cast<std::size_t>(i)])) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(nv);
      for (std::size_t c = 0; c < row.children.size(); ++c) g(local_index(st, row.children[c]) - 1) += row.coeffs[c];
      if (i == 0) {
        rhs.push_back(1.0);
      } else {
        g(i - 1) -= 1.0;
        rhs.push_back(0.0);
      }
      rows.push_back(std::move(g));
    }
  }
  for (Eigen::Index j = 0; j < nv; ++j) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(nv);
    g(j) = -1.0;
    const bool leaf = sp.node(st.nodes[static_cast<std::size_t>(j + 1)]).t == m.horizon();
    rhs.push_back(leaf ? -opts.deflator_floor : 0.0);
    rows.push_back(std::move(g));
  }
  Eigen::MatrixXd G(static_cast<Eigen::Index>(rows.size()), nv);
  for (std::size_t r = 0; r < rows.size(); ++r) G.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  const Eigen::VectorXd h = Eigen::Map<const Eigen::VectorXd>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));

  const double root_prob = sp.node(root).prob;
  SeparableObjective f;
  f.A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(st.leaves.size()), nv);
  f.b = Eigen::VectorXd::Zero(f.A.rows());
  f.w.resize(f.A.rows());
  for (std::size_t j = 0; j < st.leaves.size(); ++j) {
    f.A(static_cast<Eigen::Index>(j), st.leaves[j] - 1) = 1.0;
    f.w(static_cast<Eigen::Index>(j)) = sp.node(st.nodes[static_cast<std::size_t>(st.leaves[j])]).prob / root_prob;
  }
  f.phi = [&u, eta](double z) { return z > 0.0 ? u.V(eta * z) : kInf; };
  f.dphi = [&u, eta](double z) { return -eta * u.I(eta * z); };
  f.d2phi = [&u, eta](double z) { return eta * eta * u.Vprime2(eta * z); };

  const std::vector<double> density = node_density(m);
  const double z_root = density[static_cast<std::size_t>(root)];
  Eigen::VectorXd y0(nv);
  for (Eigen::Index j = 0; j < nv; ++j) {
    const auto li = static_cast<std::size_t>(j + 1);
    y0(j) = std::pow(opts.start_scale, st.depth[li]) * density[static_cast<std::size_t>(st.nodes[li])] / z_root;
  }
  if (((h - G * y0).array() <= 0.0).any()) {
    throw SolverError(kModule, fmt::format("no strictly feasible deflator start at node {} (floor {})", root,
                                           opts.deflator_floor));
  }
  const BarrierResult res = minimize_with_barrier(f, G, h, y0, opts.barrier);
  if (res.status == BarrierStatus::kUnbounded) {
    throw SolverError(kModule, fmt::format("dual unbounded below at node {} (t={})", root, sp.node(root).t));
  }
  out.deflator.assign(static_cast<std::size_t>(k), 1.0);
  for (Eigen::Index j = 0; j < nv; ++j) out.deflator[static_cast<std::size_t>(j + 1)] = res.x(j);
  out.value = res.objective;
  out.kkt = res.kkt_residual;
  for (std::size_t j = 0; j < st.leaves.size(); ++j) {
    const double hy = eta * out.deflator[static_cast<std::size_t>(st.leaves[j])];
    out.vprime -= f.w(static_cast<Eigen::Index>(j)) * hy * u.I(hy) / eta;
  }
  return out;
}

DualityResult primal_solve(const MarketModel& m, const UtilityPair& u, const StoppingTime& tau,
                           const RandomVariable& xi, const SolveOptions& opts) {
  const FilteredSpace& sp = m.space();
  DualityResult res;
  res.atoms = sp.sigma_at(tau);
  require_measurable_positive(sp, res.atoms, xi, "xi");
  const std::size_t n = res.atoms.size();
  std::vector<NodePrimal> parts(n);
  for_each_atom(opts, n, [&](std::size_t a) {
    const Atom& atom = res.atoms.atom(a);
    parts[a] = solve_primal_at_node(m, u, atom.node, xi[static_cast<std::size_t>(atom.scenarios.front())], opts);
  });
  res.node_wealth.assign(sp.nodes().size(), kNaN);
  for (std::size_t a = 0; a < n; ++a) {
    const double x0 = parts[a].wealth.front();
    res.atom_values_u.push_back(parts[a].value);
    res.u_prime.push_back(parts[a].uprime);
    res.kkt_residual = std::max(res.kkt_residual, parts[a].kkt);
    for (std::size_t i = 0; i < parts[a].nodes.size(); ++i) {
      res.node_wealth[static_cast<std::size_t>(parts[a].nodes[i])] = parts[a].wealth[i] / x0;
    }
  }
  res.wealth_path = node_values_to_path(sp, tau, res.node_wealth);
  res.X_hat = res.wealth_path.back();
  return res;
}

DualityResult dual_solve(const MarketModel& m, const UtilityPair& u, const StoppingTime& tau,
                         const RandomVariable& eta, const SolveOptions& opts) {
  const FilteredSpace& sp = m.space();
  DualityResult res;
  res.atoms = sp.sigma_at(tau);
  require_measurable_positive(sp, res.atoms, eta, "eta");
  const std::size_t n = res.atoms.size();
  std::vector<NodeDual> parts(n);
  for_each_atom(opts, n, [&](std::size_t a) {
    const Atom& atom = res.atoms.atom(a);
    parts[a] = solve_dual_at_node(m, u, atom.node, eta[static_cast<std::size_t>(atom.scenarios.front())], opts);
  });
  res.node_deflator.assign(sp.nodes().size(), kNaN);
  for (std::size_t a = 0; a < n; ++a) {
    res.atom_values_v.push_back(parts[a].value);
    res.v_prime.push_back(parts[a].vprime);
    res.kkt_residual = std::max(res.kkt_residual, parts[a].kkt);
    for (std::size_t i = 0; i < parts[a].nodes.size(); ++i) {
      res.node_deflator[static_cast<std::size_t>(parts[a].nodes[i])] = parts[a].deflator[i];
    }
  }
  res.deflator_path = node_values_to_path(sp, tau, res.node_deflator);
  res.Y_hat = res.deflator_path.back();
  return res;
}

DerivativeReport dual_derivative(const MarketModel& m, const UtilityPair& u, const StoppingTime& tau,
                                 const RandomVariable& eta, const SolveOptions& opts) {
  DerivativeReport rep;
  const DualityResult base = dual_solve(m, u, tau, eta, opts);
  const RandomVariable up = eta * (1.0 + 1e-4);
  const RandomVariable down = eta * (1.0 - 1e-4);
  const DualityResult hi = dual_solve(m, u, tau, up, opts);
  const DualityResult lo = dual_solve(m, u, tau, down, opts);
  rep.formula = base.v_prime;
  for (std::size_t a = 0; a < base.atoms.size(); ++a) {
    const double e = eta[static_cast<std::size_t>(base.atoms.atom(a).scenarios.front())];
    const double fd = (hi.atom_values_v[a] - lo.atom_values_v[a]) / (2e-4 * e);
    rep.finite_difference.push_back(fd);
    const double gap = std::abs(fd - rep.formula[a]) / std::max(std::abs(rep.formula[a]), 1e-300);
    if (gap > rep.max_rel_gap) rep.max_rel_gap = gap;
  }
  rep.consistent = rep.max_rel_gap <= 5e-3;
  if (!rep.consistent) {
    rep.diagnostic = fmt::format("derivative inconsistency: relative gap {:.3g}", rep.max_rel_gap);
  }
  return rep;
}

ConjugacyReport conjugacy_check(const MarketModel& m, const UtilityPair& u, const StoppingTime& tau,
                                const std::vector<double>& etas, int grid_points, const SolveOptions& opts) {
  if (grid_points < 3) throw InvalidInput(kModule, "conjugacy grid needs at least 3 points");
  const FilteredSpace& sp = m.space();
  const SigmaAlgebra atoms = sp.sigma_at(tau);
  ConjugacyReport rep;
  rep.grid_points = grid_points;
  for (double eta : etas) {
    if (!(eta > 0.0)) throw InvalidInput(kModule, "eta grid must be positive");
    const double lo = std::log(u.I(eta * 1e3));
    const double hi = std::log(u.I(eta * 1e-3));
    std::vector<double> xs(static_cast<std::size_t>(grid_points));
    for (int k = 0; k < grid_points; ++k) {
      xs[static_cast<std::size_t>(k)] = std::exp(lo + (hi - lo) * k / (grid_points - 1));
    }
    std::vector<ConjugacyEntry> entries(atoms.size());
    for_each_atom(opts, atoms.size(), [&](std::size_t a) {
      const int root = atoms.atom(a).node;
      auto g = [&](double x) { return solve_primal_at_node(m, u, root, x, opts).value - x * eta; };
      ConjugacyEntry& e = entries[a];
      e.eta = eta;
      e.atom = static_cast<int>(a);
      e.v = solve_dual_at_node(m, u, root, eta, opts).value;
      e.grid_max = -kInf;
      std::size_t best = 0;
      for (std::size_t k = 0; k < xs.size(); ++k) {
        const double val = g(xs[k]);
        if (val > e.grid_max) {
          e.grid_max = val;
          best = k;
        }
      }
      e.xi_argmax = xs[best];
      e.residual = std::abs(e.v - e.grid_max);
      const double a_lo = std::log(xs[best == 0 ? 0 : best - 1]);
      const double a_hi = std::log(xs[std::min(best + 1, xs.size() - 1)]);
      const auto r = boost::math::tools::brent_find_minima([&](double lx) { return -g(std::exp(lx)); }, a_lo,
                                                           a_hi, 40);
      e.refined_max = std::max(e.grid_max, -r.second);
      e.refined_residual = std::abs(e.v - e.refined_max);
    });
    for (auto& e : entries) {
      rep.max_residual = std::max(rep.max_residual, e.residual);
      rep.max_refined_residual = std::max(rep.max_refined_residual, e.refined_residual);
      rep.entries.push_back(e);
    }
  }
  return rep;
}

DualRelationReport dual_relation_check(const MarketModel& m, const UtilityPair& u, const StoppingTime& tau,
                                       const RandomVariable& xi, const SolveOptions& opts) {
  const FilteredSpace& sp = m.space();
  const DualityResult primal = primal_solve(m, u, tau, xi, opts);
  DualRelationReport rep;
  rep.eta = primal.u_prime;
  const RandomVariable eta = primal.atoms.lift(rep.eta);
  const DualityResult dual = dual_solve(m, u, tau, eta, opts);
  rep.residual = RandomVariable(sp.size());
  for (std::size_t s = 0; s < sp.size(); ++s) {
    const double marginal = u.Uprime(xi[s] * primal.X_hat[s]);
    rep.residual[s] = std::abs(eta[s] * dual.Y_hat[s] - marginal) / marginal;
    rep.max_residual = std::max(rep.max_residual, rep.residual[s]);
  }
  return rep;
}

ValueProcessReport value_process(const MarketModel& m, const UtilityPair& u, double x, const SolveOptions& opts) {
  const FilteredSpace& sp = m.space();
  const StoppingTime zero = StoppingTime::constant(sp.size(), 0);
  const DualityResult base = primal_solve(m, u, zero, RandomVariable(sp.size(), x), opts);
  ValueProcessReport rep;
  rep.node_wealth.resize(sp.nodes().size());
  for (std::size_t id = 0; id < sp.nodes().size(); ++id) rep.node_wealth[id] = x * base.node_wealth[id];
  rep.node_value.assign(sp.nodes().size(), 0.0);
  for_each_atom(opts, sp.nodes().size(), [&](std::size_t id) {
    rep.node_value[id] = solve_primal_at_node(m, u, static_cast<int>(id), rep.node_wealth[id], opts).value;
  });
  for (std::size_t id = 0; id < sp.nodes().size(); ++id) {
    const Node& node = sp.nodes()[id];
    if (node.t < m.horizon()) {
      double next = 0.0;
      for (int c : node.children) next += sp.node(c).prob / node.prob * rep.node_value[static_cast<std::size_t>(c)];
      rep.max_martingale_residual = std::max(rep.max_martingale_residual, std::abs(next - rep.node_value[id]));
    }
    double terminal = 0.0;
    for (int s : node.scenarios) {
      const int leaf = sp.node_of(m.horizon(), s);
      terminal += sp.prob()[static_cast<std::size_t>(s)] / node.prob * u.U(rep.node_wealth[static_cast<std::size_t>(leaf)]);
    }
    rep.max_terminal_gap = std::max(rep.max_terminal_gap, std::abs(terminal - rep.node_value[id]));
  }
  for (int t = 0; t <= sp.horizon(); ++t) {
    RandomVariable v(sp.size());
    for (std::size_t s = 0; s < sp.size(); ++s) {
      v[s] = rep.node_value[static_cast<std::size_t>(sp.node_of(t, static_cast<int>(s)))];
    }
    rep.process.push_back(std::move(v));
  }
  return rep;
}

OracleResult brute_force_oracle(const MarketModel& m, const UtilityPair& u, const StoppingTime& tau,
                                const RandomVariable& xi, const OracleGrid& grid) {
  const FilteredSpace& sp = m.space();
  const SigmaAlgebra atoms = sp.sigma_at(tau);
  require_measurable_positive(sp, atoms, xi, "xi");
  if (!(grid.step > 0.0)) throw InvalidInput(kModule, "oracle step must be positive");
  OracleResult out;
  out.X_T = RandomVariable(sp.size(), 1.0);
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    const Atom& atom = atoms.atom(a);
    const Subtree st = make_subtree(m, atom.node);
    const std::size_t dim = st.internal.size();
    if (dim > 4) {
      throw InvalidInput(kModule, fmt::format("oracle refuses {} strategy variables on atom {} (limit 4)", dim, a));
    }
    const double x0 = xi[static_cast<std::size_t>(atom.scenarios.front())];
    if (dim == 0) {
      out.atom_values.push_back(u.U(x0));
      out.positions.emplace_back();
      continue;
    }
    std::vector<double> lo(dim), hi(dim);
    std::vector<const NodeStep*> steps(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      steps[d] = &m.step(st.nodes[static_cast<std::size_t>(st.internal[d])]);
      if (!steps[d]->h_lo || !steps[d]->h_hi) {
        throw InvalidInput(kModule, "oracle needs a bounded position box at every node (market has arbitrage)");
      }
      lo[d] = *steps[d]->h_lo;
      hi[d] = *steps[d]->h_hi;
    }
    std::vector<double> best(dim, 0.0);
    double step = grid.step;
    for (int level = 0; level <= grid.refine_levels; ++level) {
      // Refined levels score candidates by the utility increment over the
      // incumbent, so that near-flat optima are resolved below the rounding
      // level of absolute utility values.
      const std::vector<double> ref = best;
      std::vector<double> ref_wealth(st.nodes.size(), x0);
      for (std::size_t d = 0; d < dim; ++d) {
        const NodeStep& stp = *steps[d];
        for (std::size_t c = 0; c < stp.children.size(); ++c) {
          ref_wealth[static_cast<std::size_t>(local_index(st, stp.children[c]))] =
              ref_wealth[static_cast<std::size_t>(st.internal[d])] * (1.0 + ref[d] * stp.dS[c]);
        }
      }
      double best_score = -kInf;
      std::vector<std::vector<double>> axes(dim);
      double points = 1.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double a0 = level == 0 ? lo[d] : std::max(lo[d], best[d] - 20.0 * step);
        const double a1 = level == 0 ? hi[d] : std::min(hi[d], best[d] + 20.0 * step);
        const auto count = static_cast<std::size_t>(std::floor((a1 - a0) / step + 1e-9)) + 1;
        for (std::size_t k = 0; k < count; ++k) axes[d].push_back(a0 + static_cast<double>(k) * step);
        if (level > 0) axes[d].push_back(best[d]);
        points *= static_cast<double>(axes[d].size());
      }
      if (points > grid.max_points) {
        throw InvalidInput(kModule, fmt::format("oracle grid of {:.3g} points exceeds the limit {:.3g}", points,
                                                grid.max_points));
      }
      std::vector<double> wealth(st.nodes.size(), 0.0);
      std::vector<double> log_ratio(st.nodes.size(), 0.0);  // log(wealth / ref_wealth)
      std::vector<double> pos(dim, 0.0);
      wealth[0] = x0;
      // Depth-first over internal nodes in breadth-first order; a node's
      // wealth is fixed once its parent's position has been chosen.
      std::function<void(std::size_t)> visit = [&](std::size_t d) {
        if (d == dim) {
          double score = 0.0;
          for (int leaf : st.leaves) {
            const auto l = static_cast<std::size_t>(leaf);
            const double w = level == 0 ? u.U(wealth[l]) : u.U_increment(ref_wealth[l], std::expm1(log_ratio[l]));
            score += sp.node(st.nodes[l]).prob / atom.prob * w;
          }
          if (score > best_score) {
            best_score = score;
            best = pos;
          }
          return;
        }
        const int li = st.internal[d];
        const NodeStep& stp = *steps[d];
        for (double hval : axes[d]) {
          pos[d] = hval;
          bool ok = true;
          for (std::size_t c = 0; c < stp.children.size(); ++c) {
            const double w = wealth[static_cast<std::size_t>(li)] * (1.0 + hval * stp.dS[c]);
            if (!(w > 0.0)) ok = false;
            const auto ci = static_cast<std::size_t>(local_index(st, stp.children[c]));
            wealth[ci] = w;
            log_ratio[ci] = log_ratio[static_cast<std::size_t>(li)] +
                            std::log1p((hval - ref[d]) * stp.dS[c] / (1.0 + ref[d] * stp.dS[c]));
          }
          if (ok) visit(d + 1);
        }
      };
      visit(0);
      step /= 10.0;
    }
    out.positions.push_back(best);
    // Terminal wealth at the best point, normalized to unit initial wealth.
    std::vector<double> wealth(st.nodes.size(), 1.0);
    for (std::size_t d = 0; d < dim; ++d) {
      const int li = st.internal[d];
      const NodeStep& stp = *steps[d];
      for (std::size_t c = 0; c < stp.children.size(); ++c) {
        wealth[static_cast<std::size_t>(local_index(st, stp.children[c]))] =
            wealth[static_cast<std::size_t>(li)] * (1.0 + best[d] * stp.dS[c]);
      }
    }
    double best_value = 0.0;
    for (int leaf : st.leaves) {
      const auto l = static_cast<std::size_t>(leaf);
      best_value += sp.node(st.nodes[l]).prob / atom.prob * u.U(x0 * wealth[l]);
      for (int s : sp.node(st.nodes[l]).scenarios) out.X_T[static_cast<std::size_t>(s)] = wealth[l];
    }
    out.atom_values.push_back(best_value);
  }
  return out;
}

}  // namespace dlab
