#include "duality_lab/market_model.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "duality_lab/errors.hpp"
#include "duality_lab/simplex.hpp"

namespace dlab {

namespace {

constexpr const char* kModule = "market_model";
constexpr double kMartingaleTol = 1e-10;
constexpr double kMeasurabilityTol = 1e-12;
constexpr double kNflvrEps = 1e-9;

bool constant_on_cells(const RandomVariable& x, const Partition& partition, double tol) {
  for (const auto& cell : partition) {
    const double first = x[static_cast<std::size_t>(cell.front())];
    for (int s : cell) {
      if (std::abs(x[static_cast<std::size_t>(s)] - first) > tol) return false;
    }
  }
  return true;
}

double cell_mean(const FilteredSpace& space, const RandomVariable& x, const std::vector<int>& cell) {
  double mass = 0.0;
  double acc = 0.0;
  for (int s : cell) {
    mass += space.prob()[static_cast<std::size_t>(s)];
    acc += space.prob()[static_cast<std::size_t>(s)] * x[static_cast<std::size_t>(s)];
  }
  return acc / mass;
}

}  // namespace

std::vector<std::string> MarketModel::diagnose(const FilteredSpace& space,
                                               const std::vector<RandomVariable>& dM,
                                               const std::vector<RandomVariable>& lam) {
  std::vector<std::string> issues;
  const int horizon = space.horizon();
  if (static_cast<int>(dM.size()) != horizon) {
    issues.push_back(fmt::format("dM: expected {} periods, got {}", horizon, dM.size()));
  }
  if (static_cast<int>(lam.size()) != horizon) {
    issues.push_back(fmt::format("lam: expected {} periods, got {}", horizon, lam.size()));
  }
  if (!issues.empty()) return issues;

  RandomVariable price(space.size(), 1.0);
  for (int t = 1; t <= horizon; ++t) {
    const auto& inc = dM[static_cast<std::size_t>(t - 1)];
    const auto& drift = lam[static_cast<std::size_t>(t - 1)];
    if (inc.size() != space.size() || drift.size() != space.size()) {
      issues.push_back(fmt::format("period {}: one value per scenario expected", t));
      continue;
    }
    bool finite = true;
    for (std::size_t s = 0; s < space.size(); ++s) {
      finite = finite && std::isfinite(inc[s]) && std::isfinite(drift[s]);
    }
    if (!finite) {
      issues.push_back(fmt::format("period {}: non-finite dM or lam", t));
      continue;
    }
    if (!constant_on_cells(inc, space.partition(t), kMeasurabilityTol)) {
      issues.push_back(fmt::format("dM period {}: not F_{}-measurable", t, t));
    }
    if (!constant_on_cells(drift, space.partition(t - 1), kMeasurabilityTol)) {
      issues.push_back(fmt::format("lam period {}: not predictable (varies inside a cell of F_{})", t, t - 1));
    }
    for (std::size_t c = 0; c < space.partition(t - 1).size(); ++c) {
      const auto& cell = space.partition(t - 1)[c];
      const double mean = cell_mean(space, inc, cell);
      if (std::abs(mean) > kMartingaleTol) {
        issues.push_back(fmt::format(
            "dM period {}: E[dM | F_{}] = {:.12g} != 0 on cell {} (martingale property violated)", t,
            t - 1, mean, c));
      }
      RandomVariable sq(space.size());
      for (std::size_t s = 0; s < space.size(); ++s) sq[s] = inc[s] * inc[s];
      const double qv = cell_mean(space, sq, cell);
      for (int s : cell) {
        price[static_cast<std::size_t>(s)] +=
            inc[static_cast<std::size_t>(s)] + drift[static_cast<std::size_t>(s)] * qv;
      }
    }
    for (std::size_t s = 0; s < space.size(); ++s) {
      if (!(price[s] > 0.0)) {
        issues.push_back(fmt::format("price S_{} is nonpositive ({:.12g}) on scenario {}", t, price[s], s));
        break;
      }
    }
  }
  return issues;
}

MarketModel::MarketModel(FilteredSpace space, std::vector<RandomVariable> dM,
                         std::vector<RandomVariable> lam)
    : space_(std::move(space)), dM_(std::move(dM)), lam_(std::move(lam)) {}

MarketModel MarketModel::build(FilteredSpace space, std::vector<RandomVariable> dM,
                               std::vector<RandomVariable> lam) {
  const auto issues = diagnose(space, dM, lam);
  if (!issues.empty()) {
    const bool shape = static_cast<int>(dM.size()) != space.horizon() ||
                       static_cast<int>(lam.size()) != space.horizon();
    if (shape) throw InvalidInput(kModule, issues.front());
    throw ModelError(kModule, issues.front());
  }
  MarketModel m(std::move(space), std::move(dM), std::move(lam));
  const FilteredSpace& sp = m.space_;
  const int horizon = sp.horizon();
  m.S_.assign(1, RandomVariable(sp.size(), 1.0));
  for (int t = 1; t <= horizon; ++t) {
    const auto& inc = m.dM_[static_cast<std::size_t>(t - 1)];
    const auto& drift = m.lam_[static_cast<std::size_t>(t - 1)];
    RandomVariable qv(sp.size());
    RandomVariable sq(sp.size());
    for (std::size_t s = 0; s < sp.size(); ++s) sq[s] = inc[s] * inc[s];
    for (const auto& cell : sp.partition(t - 1)) {
      const double v = cell_mean(sp, sq, cell);
      for (int s : cell) qv[static_cast<std::size_t>(s)] = v;
    }
    RandomVariable ds(sp.size());
    for (std::size_t s = 0; s < sp.size(); ++s) ds[s] = inc[s] + drift[s] * qv[s];
    m.qv_.push_back(qv);
    m.S_.push_back(m.S_.back() + ds);
    m.dS_.push_back(std::move(ds));
  }

  m.steps_.resize(sp.nodes().size());
  for (std::size_t id = 0; id < sp.nodes().size(); ++id) {
    const Node& node = sp.nodes()[id];
    if (node.t >= horizon) continue;
    NodeStep& step = m.steps_[id];
    step.children = node.children;
    const auto& ds = m.dS_[static_cast<std::size_t>(node.t)];
    for (int child : node.children) {
      const Node& c = sp.node(child);
      step.cond_prob.push_back(c.prob / node.prob);
      step.dS.push_back(ds[static_cast<std::size_t>(c.scenarios.front())]);
    }
    for (std::size_t k = 0; k < step.dS.size(); ++k) step.mean_dS += step.cond_prob[k] * step.dS[k];
    for (std::size_t k = 0; k < step.dS.size(); ++k) {
      const double d = step.dS[k] - step.mean_dS;
      step.var_dS += step.cond_prob[k] * d * d;
    }
    for (double d : step.dS) {
      if (d < 0.0) {
        const double bound = -1.0 / d;
        step.h_hi = step.h_hi ? std::min(*step.h_hi, bound) : bound;
      } else if (d > 0.0) {
        const double bound = -1.0 / d;
        step.h_lo = step.h_lo ? std::max(*step.h_lo, bound) : bound;
      }
    }
  }
  return m;
}

const NodeStep& MarketModel::step(int node) const {
  const NodeStep& s = steps_.at(static_cast<std::size_t>(node));
  if (s.children.empty()) throw InvalidInput(kModule, fmt::format("node {} is terminal", node));
  return s;
}

MarketModel MarketModel::with_drift(std::vector<RandomVariable> lam) const {
  return build(space_, dM_, std::move(lam));
}

std::vector<RandomVariable> build_density(const MarketModel& market) {
  const FilteredSpace& sp = market.space();
  std::vector<RandomVariable> z(static_cast<std::size_t>(market.horizon() + 1),
                                RandomVariable(sp.size(), 1.0));
  for (std::size_t id = 0; id < sp.nodes().size(); ++id) {
    const Node& node = sp.nodes()[id];
    if (node.t >= market.horizon()) continue;
    const NodeStep& step = market.step(static_cast<int>(id));
    double slope = 0.0;
    if (step.var_dS <= 1e-300 || step.var_dS <= 1e-24 * (step.mean_dS * step.mean_dS)) {
      if (std::abs(step.mean_dS) > 1e-14) {
        throw ModelError(kModule, fmt::format("arbitrage: riskless nonzero drift at node t={} cell={}",
                                              node.t, node.cell));
      }
    } else {
      slope = step.mean_dS / step.var_dS;
    }
    for (std::size_t k = 0; k < step.children.size(); ++k) {
      const double factor = 1.0 - slope * (step.dS[k] - step.mean_dS);
      if (!(factor > 0.0)) {
        throw ModelError(kModule, fmt::format("density nonpositive at node t={} cell={} (factor {:.12g})",
                                              node.t, node.cell, factor));
      }
      for (int s : sp.node(step.children[k]).scenarios) {
        z[static_cast<std::size_t>(node.t + 1)][static_cast<std::size_t>(s)] =
            z[static_cast<std::size_t>(node.t)][static_cast<std::size_t>(s)] * factor;
      }
    }
  }
  return z;
}

std::optional<RandomVariable> equivalent_martingale_measure(const MarketModel& market, double eps) {
  const FilteredSpace& sp = market.space();
  const int n = static_cast<int>(sp.size());
  std::vector<int> internal;
  for (std::size_t id = 0; id < sp.nodes().size(); ++id) {
    if (sp.nodes()[id].t < market.horizon()) internal.push_back(static_cast<int>(id));
  }
  // columns: s, r_0..r_{N-1}; q_w = s + r_w
  const int rows = 1 + static_cast<int>(internal.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, n + 1);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
  a(0, 0) = n;
  a.row(0).tail(n).setOnes();
  b(0) = 1.0;
  for (std::size_t k = 0; k < internal.size(); ++k) {
    const Node& node = sp.node(internal[k]);
    const auto& ds = market.dS(node.t + 1);
    const int row = 1 + static_cast<int>(k);
    for (int s : node.scenarios) {
      a(row, 0) += ds[static_cast<std::size_t>(s)];
      a(row, 1 + s) = ds[static_cast<std::size_t>(s)];
    }
  }
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n + 1);
  c(0) = 1.0;
  const LpResult lp = solve_standard_form_lp(a, b, c);
  if (lp.status != LpStatus::kOptimal || lp.objective < eps) return std::nullopt;
  RandomVariable q(sp.size());
  for (int s = 0; s < n; ++s) q[static_cast<std::size_t>(s)] = lp.x(0) + lp.x(1 + s);
  return q;
}

bool check_nflvr(const MarketModel& market) {
  return equivalent_martingale_measure(market, kNflvrEps).has_value();
}

std::vector<int> subtree_nodes(const FilteredSpace& space, int root) {
  std::vector<int> order{root};
  for (std::size_t k = 0; k < order.size(); ++k) {
    for (int child : space.node(order[k]).children) order.push_back(child);
  }
  return order;
}

std::vector<DeflatorConstraint> deflator_rows(const MarketModel& market, int node) {
  const NodeStep& step = market.step(node);
  std::vector<DeflatorConstraint> rows;
  rows.push_back(DeflatorConstraint{node, step.children, step.cond_prob, 0.0});
  for (const auto& h : {step.h_hi, step.h_lo}) {
    if (!h) continue;
    DeflatorConstraint row{node, step.children, {}, *h};
    for (std::size_t k = 0; k < step.children.size(); ++k) {
      // endpoint positions zero out one branch; clamp rounding residue
      row.coeffs.push_back(step.cond_prob[k] * std::max(0.0, 1.0 + *h * step.dS[k]));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

DeflatorConstraintSet deflator_constraints(const MarketModel& market, const StoppingTime& tau) {
  const FilteredSpace& sp = market.space();
  const SigmaAlgebra g = sp.sigma_at(tau);
  DeflatorConstraintSet set;
  for (const Atom& atom : g.atoms()) {
    set.roots.push_back(atom.node);
    for (int id : subtree_nodes(sp, atom.node)) {
      if (sp.node(id).t >= market.horizon()) continue;
      for (auto& row : deflator_rows(market, id)) set.constraints.push_back(std::move(row));
    }
  }
  return set;
}

}  // namespace dlab
