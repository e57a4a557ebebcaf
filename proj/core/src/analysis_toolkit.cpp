#include "duality_lab/analysis_toolkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "duality_lab/errors.hpp"

namespace dlab {

namespace {

constexpr const char* kModule = "analysis_toolkit";
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxNetIterations = 10000;
constexpr double kMaxCombinations = 1e6;

}  // namespace

double ky_fan(std::span<const double> prob, const RandomVariable& x, const RandomVariable& y) {
  if (x.size() != y.size() || x.size() != prob.size()) {
    throw InvalidInput(kModule, "ky_fan needs equal lengths");
  }
  double acc = 0.0;
  for (std::size_t s = 0; s < x.size(); ++s) acc += prob[s] * std::min(std::abs(x[s] - y[s]), 1.0);
  return acc;
}

RandomVariable TailSequence::at(int n) const {
  if (n < static_cast<int>(prefix.size())) return prefix[static_cast<std::size_t>(n)];
  const auto k = static_cast<std::size_t>(n - static_cast<int>(prefix.size())) % cycle.size();
  RandomVariable x = cycle[k];
  if (perturbation) x += perturbation(n);
  return x;
}

RandomVariable p_lim_extremum(const TailSequence& seq, LimitMode mode) {
  if (seq.cycle.empty()) throw InvalidInput(kModule, "tail rule needs a nonempty cycle");
  const std::size_t n = seq.cycle.front().size();
  auto check_finite = [&](const RandomVariable& x) {
    if (x.size() != n) throw InvalidInput(kModule, "sequence members differ in length");
    for (double v : x) {
      if (!std::isfinite(v)) throw InvalidInput(kModule, "unbounded member: extended values are not modelled");
    }
  };
  for (const auto& x : seq.prefix) check_finite(x);
  for (const auto& x : seq.cycle) check_finite(x);
  // The prefix never affects a limit; the vanishing perturbation neither.
  RandomVariable out = seq.cycle.front();
  for (const auto& x : seq.cycle) {
    for (std::size_t s = 0; s < n; ++s) {
      out[s] = mode == LimitMode::kLimsup ? std::max(out[s], x[s]) : std::min(out[s], x[s]);
    }
  }
  return out;
}

CondUiResult cond_ui_check(const FilteredSpace& space, std::span<const RandomVariable> family,
                           const SigmaAlgebra& g, const std::function<double(double)>& growth) {
  double prev = growth(1.0);
  for (double x = 2.0; x <= 1e6; x *= 2.0) {
    const double ratio = growth(x) / x;
    if (!(ratio > prev)) throw InvalidInput(kModule, "growth function is not superlinear on [1, 1e6]");
    prev = ratio;
  }
  CondUiResult res;
  res.atom_bounds.assign(g.size(), 0.0);
  double running = 0.0;
  for (const auto& x : family) {
    RandomVariable gx(space.size());
    for (std::size_t s = 0; s < space.size(); ++s) gx[s] = growth(std::abs(x[s]));
    const std::vector<double> ce = g.atom_values(cond_expect(space, gx, g));
    for (std::size_t a = 0; a < ce.size(); ++a) {
      res.atom_bounds[a] = std::max(res.atom_bounds[a], ce[a]);
      running = std::max(running, ce[a]);
    }
    res.running_sup.push_back(running);
  }
  res.bound = running;
  const std::size_t k = res.running_sup.size();
  if (k >= 2 && res.running_sup[k - 2] > 0.0) {
    res.growth_flag = res.running_sup[k - 1] / res.running_sup[k - 2] > 1.05;
  }
  res.ok = std::isfinite(res.bound) && !res.growth_flag;
  return res;
}

ConvexCompactSet ConvexCompactSet::from_generators(const FilteredSpace& space, const SigmaAlgebra& g,
                                                   std::vector<RandomVariable> generators, bool positive) {
  if (generators.empty()) throw InvalidInput(kModule, "convex compact set needs at least one generator");
  ConvexCompactSet k;
  k.g_ = g;
  k.lo_.assign(g.size(), kInf);
  k.hi_.assign(g.size(), -kInf);
  for (const auto& x : generators) {
    if (x.size() != space.size() || !g.is_measurable(x, 0.0)) {
      throw InvalidInput(kModule, "generators must be G-measurable scenario vectors");
    }
    const auto v = g.atom_values(x);
    for (std::size_t a = 0; a < v.size(); ++a) {
      if (!std::isfinite(v[a])) throw InvalidInput(kModule, "generators must be finite");
      k.lo_[a] = std::min(k.lo_[a], v[a]);
      k.hi_[a] = std::max(k.hi_[a], v[a]);
    }
  }
  for (const auto& atom : g.atoms()) k.prob_.push_back(atom.prob);
  if (positive && *std::min_element(k.lo_.begin(), k.lo_.end()) <= 0.0) {
    throw InvalidInput(kModule, "set touches 0 but was declared strictly positive");
  }
  return k;
}

ConvexCompactSet ConvexCompactSet::order_interval(const FilteredSpace& space, const SigmaAlgebra& g,
                                                  const RandomVariable& a, const RandomVariable& b, bool positive) {
  const auto lo = g.atom_values(a);
  const auto hi = g.atom_values(b);
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (!(lo[i] <= hi[i])) throw InvalidInput(kModule, "order interval needs a <= b");
  }
  return from_generators(space, g, {a, b}, positive);
}

bool ConvexCompactSet::contains(const RandomVariable& x, double tol) const {
  if (!g_.is_measurable(x, tol)) return false;
  const auto v = g_.atom_values(x);
  for (std::size_t a = 0; a < v.size(); ++a) {
    if (v[a] < lo_[a] - tol || v[a] > hi_[a] + tol) return false;
  }
  return true;
}

double ConvexCompactSet::diameter() const {
  double d = 0.0;
  for (std::size_t a = 0; a < lo_.size(); ++a) d += prob_[a] * std::min(hi_[a] - lo_[a], 1.0);
  return d;
}

std::vector<RandomVariable> ConvexCompactSet::sample(std::size_t count, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<RandomVariable> out;
  out.reserve(count);
  std::vector<double> v(lo_.size());
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t a = 0; a < lo_.size(); ++a) v[a] = lo_[a] + (hi_[a] - lo_[a]) * unit(rng);
    out.push_back(g_.lift(v));
  }
  return out;
}

namespace {

// Per-atom hull interval of a net.
void hull_bounds(const ConvexCompactSet& k, std::span<const RandomVariable> net, HullKind kind,
                 std::vector<double>& lo, std::vector<double>& hi) {
  lo.assign(k.atoms(), kInf);
  hi.assign(k.atoms(), -kInf);
  for (const auto& x : net) {
    const auto v = k.sigma().atom_values(x);
    for (std::size_t a = 0; a < v.size(); ++a) {
      lo[a] = std::min(lo[a], v[a]);
      hi[a] = std::max(hi[a], v[a]);
    }
  }
  if (kind == HullKind::kPartitionSub) std::fill(lo.begin(), lo.end(), -kInf);
}

double interval_gap(double v, double lo, double hi) {
  if (v < lo) return lo - v;
  if (v > hi) return v - hi;
  return 0.0;
}

std::vector<RandomVariable> greedy_net(const ConvexCompactSet& k, double r, HullKind kind) {
  if (!(r > 0.0)) throw InvalidInput(kModule, "net radius must be positive");
  std::vector<RandomVariable> net;
  net.push_back(kind == HullKind::kConvex ? k.lower_corner() : k.upper_corner());
  std::vector<double> lo, hi;
  for (int it = 0; it < kMaxNetIterations; ++it) {
    hull_bounds(k, net, kind, lo, hi);
    // The member farthest from an interval hull is a corner of K: on each
    // atom take whichever end of K lies farther outside the hull.
    std::vector<double> far(k.atoms());
    double dist = 0.0;
    for (std::size_t a = 0; a < k.atoms(); ++a) {
      const double dl = interval_gap(k.lower()[a], lo[a], hi[a]);
      const double dh = interval_gap(k.upper()[a], lo[a], hi[a]);
      far[a] = dh > dl ? k.upper()[a] : k.lower()[a];
      dist += k.atom_prob()[a] * std::min(std::max(dl, dh), 1.0);
    }
    if (dist <= r) return net;
    net.push_back(k.sigma().lift(far));
  }
  throw SolverError(kModule, "net construction did not terminate within 1e4 iterations");
}

}  // namespace

double hull_distance(const ConvexCompactSet& k, std::span<const RandomVariable> net, const RandomVariable& x,
                     HullKind kind) {
  if (net.empty()) throw InvalidInput(kModule, "hull of an empty net");
  std::vector<double> lo, hi;
  hull_bounds(k, net, kind, lo, hi);
  const auto v = k.sigma().atom_values(x);
  double d = 0.0;
  for (std::size_t a = 0; a < v.size(); ++a) d += k.atom_prob()[a] * std::min(interval_gap(v[a], lo[a], hi[a]), 1.0);
  return d;
}

std::vector<RandomVariable> ftau_convex_net(const ConvexCompactSet& k, double r) {
  return greedy_net(k, r, HullKind::kConvex);
}

std::vector<RandomVariable> partition_subconvex_net(const ConvexCompactSet& k, double r) {
  return greedy_net(k, r, HullKind::kPartitionSub);
}

CoverCertificate net_cover_certificate(const ConvexCompactSet& k, std::span<const RandomVariable> net, double r,
                                       HullKind kind, std::size_t samples, std::uint64_t seed) {
  CoverCertificate cert;
  cert.samples = samples;
  cert.seed = seed;
  for (const auto& x : k.sample(samples, seed)) {
    const double d = hull_distance(k, net, x, kind);
    cert.max_distance = std::max(cert.max_distance, d);
    if (d > r) ++cert.violations;
  }
  return cert;
}

namespace {

// Terminal deflator lattice of one atom, reduced to the points with maximal
// last coordinate for each prefix (enough for both inner problems since the
// kernel is decreasing in every y coordinate).
struct YFrontier {
  Eigen::MatrixXd points;  // k x M, already scaled
};

YFrontier deflator_frontier(const MarketModel& m, const Atom& atom, double step, double scale) {
  const FilteredSpace& sp = m.space();
  const std::vector<int> nodes = subtree_nodes(sp, atom.node);
  std::vector<int> local(sp.nodes().size(), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) local[static_cast<std::size_t>(nodes[i])] = static_cast<int>(i);
  std::vector<int> leaf_of_scenario(atom.scenarios.size());
  for (std::size_t j = 0; j < atom.scenarios.size(); ++j) {
    leaf_of_scenario[j] = local[static_cast<std::size_t>(sp.node_of(m.horizon(), atom.scenarios[j]))];
  }
  std::vector<std::vector<DeflatorConstraint>> rows(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (sp.node(nodes[i]).t < m.horizon()) rows[i] = deflator_rows(m, nodes[i]);
  }
  const std::size_t k = atom.scenarios.size();
  std::vector<double> values(nodes.size());
  // Smallest supermartingale-compatible Y given the leaves; feasible iff <= 1 at the root.
  auto feasible = [&](const std::vector<double>& y) {
    for (std::size_t j = 0; j < k; ++j) values[static_cast<std::size_t>(leaf_of_scenario[j])] = y[j];
    for (std::size_t i = nodes.size(); i-- > 0;) {
      if (rows[i].empty()) continue;
      double need = 0.0;
      for (const auto& row : rows[i]) {
        double acc = 0.0;
        for (std::size_t c = 0; c < row.children.size(); ++c) {
          acc += row.coeffs[c] * values[static_cast<std::size_t>(local[static_cast<std::size_t>(row.children[c])])];
        }
        need = std::max(need, acc);
      }
      values[i] = need;
    }
    return values[0] <= 1.0 + 1e-12;
  };
  std::vector<long> limit(k);
  double combos = 1.0;
  for (std::size_t j = 0; j < k; ++j) {
    const double cond = sp.prob()[static_cast<std::size_t>(atom.scenarios[j])] / atom.prob;
    limit[j] = static_cast<long>(std::floor(1.0 / cond / step + 1e-9));
    if (j + 1 < k) combos *= static_cast<double>(limit[j]);
  }
  if (combos > kMaxCombinations) {
    throw InvalidInput(kModule, fmt::format("deflator lattice of {:.3g} prefixes exceeds 1e6", combos));
  }
  std::vector<std::vector<double>> pts;
  std::vector<long> idx(k, 1);
  std::vector<double> y(k);
  for (;;) {
    for (std::size_t j = 0; j + 1 < k; ++j) y[j] = static_cast<double>(idx[j]) * step;
    long lo = 0, hi = limit[k - 1];
    while (lo < hi) {
      const long mid = (lo + hi + 1) / 2;
      y[k - 1] = static_cast<double>(mid) * step;
      if (feasible(y)) {
        lo = mid;
      } else {
        hi = mid - 1;
      }
    }
    if (lo >= 1) {
      y[k - 1] = static_cast<double>(lo) * step;
      pts.push_back(y);
    }
    std::size_t j = 0;
    while (j + 1 < k) {
      if (++idx[j] <= limit[j]) break;
      idx[j] = 1;
      ++j;
    }
    if (j + 1 >= k) break;
  }
  YFrontier f;
  f.points.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(pts.size()));
  for (std::size_t c = 0; c < pts.size(); ++c) {
    for (std::size_t j = 0; j < k; ++j) f.points(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) = scale * pts[c][j];
  }
  return f;
}

struct Box {
  std::vector<long> lo, hi;
  double ub = 0.0;
  bool operator<(const Box& o) const { return ub < o.ub; }
};

}  // namespace

std::vector<MinimaxAtom> conditional_minimax_verify(const FilteredSpace& space, const SigmaAlgebra& g,
                                                    const UtilityPair& u, const LatticeSpec& xset,
                                                    const YSetSpec& yset) {
  if (!(xset.step > 0.0) || !(xset.lo > 0.0) || xset.hi < xset.lo) {
    throw InvalidInput(kModule, "x lattice needs 0 < lo <= hi and step > 0");
  }
  const long nx = static_cast<long>(std::floor((xset.hi - xset.lo) / xset.step + 1e-9)) + 1;
  if (static_cast<double>(nx) > kMaxCombinations) throw InvalidInput(kModule, "x lattice exceeds 1e6 points");
  auto xval = [&](long i) { return xset.lo + static_cast<double>(i) * xset.step; };
  std::vector<double> ux(static_cast<std::size_t>(nx));
  for (long i = 0; i < nx; ++i) ux[static_cast<std::size_t>(i)] = u.U(xval(i));

  std::vector<MinimaxAtom> out;
  for (const Atom& atom : g.atoms()) {
    const std::size_t k = atom.scenarios.size();
    if (k > 4) throw InvalidInput(kModule, fmt::format("atom with {} scenarios exceeds the limit 4", k));
    Eigen::VectorXd p(static_cast<Eigen::Index>(k));
    for (std::size_t j = 0; j < k; ++j) {
      p(static_cast<Eigen::Index>(j)) = space.prob()[static_cast<std::size_t>(atom.scenarios[j])] / atom.prob;
    }
    Eigen::MatrixXd ys;
    double ystep = 0.0;
    if (yset.market != nullptr) {
      ys = deflator_frontier(*yset.market, atom, yset.step, yset.scale).points;
      ystep = yset.step * yset.scale;
    } else {
      if (yset.points.empty()) throw InvalidInput(kModule, "Y set is empty");
      ys.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(yset.points.size()));
      for (std::size_t c = 0; c < yset.points.size(); ++c) {
        for (std::size_t j = 0; j < k; ++j) {
          ys(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(c)) =
              yset.scale * yset.points[c][static_cast<std::size_t>(atom.scenarios[j])];
        }
      }
    }
    if (ys.cols() == 0) throw InvalidInput(kModule, "Y lattice is empty at this step");
    MinimaxAtom res;
    res.y_points = static_cast<std::size_t>(ys.cols());

    // sup over the x lattice of U(x) - x z, with its argmax index.
    auto conj = [&](double z, long* arg) {
      const double xs = u.I(z);
      long c = static_cast<long>(std::floor((xs - xset.lo) / xset.step));
      double best = -kInf;
      for (long i : {c - 1, c, c + 1, c + 2}) {
        const long ic = std::clamp(i, 0L, nx - 1);
        const double v = ux[static_cast<std::size_t>(ic)] - xval(ic) * z;
        if (v > best) {
          best = v;
          if (arg) *arg = ic;
        }
      }
      return best;
    };

    // inf_y sup_x decomposes per scenario.
    res.inf_sup = kInf;
    Eigen::Index ybest = 0;
    for (Eigen::Index c = 0; c < ys.cols(); ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += p(static_cast<Eigen::Index>(j)) * conj(ys(static_cast<Eigen::Index>(j), c), nullptr);
      if (acc < res.inf_sup) {
        res.inf_sup = acc;
        ybest = c;
      }
    }

    auto support = [&](const std::vector<long>& xi) {
      Eigen::VectorXd d(static_cast<Eigen::Index>(k));
      for (std::size_t j = 0; j < k; ++j) d(static_cast<Eigen::Index>(j)) = p(static_cast<Eigen::Index>(j)) * xval(xi[j]);
      return (d.transpose() * ys).maxCoeff();
    };
    auto utility_part = [&](const std::vector<long>& xi) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += p(static_cast<Eigen::Index>(j)) * ux[static_cast<std::size_t>(xi[j])];
      return acc;
    };

    if (ys.cols() == 1 || nx == 1) {
      // No inner optimization on one side: both orders coincide.
      res.sup_inf = res.inf_sup;
    } else {
      // sup_x inf_y = sup_x [E U(x) - h(p x)] by best-first branch and bound.
      std::vector<long> seed(k);
      for (std::size_t j = 0; j < k; ++j) conj(ys(static_cast<Eigen::Index>(j), ybest), &seed[j]);
      double best = utility_part(seed) - support(seed);
      std::priority_queue<Box> queue;
      Box root{std::vector<long>(k, 0), std::vector<long>(k, nx - 1), 0.0};
      root.ub = utility_part(root.hi) - support(root.lo);
      queue.push(root);
      while (!queue.empty()) {
        Box box = queue.top();
        queue.pop();
        if (box.ub <= best) break;
        std::vector<long> mid(k);
        std::size_t wide = 0;
        long width = -1;
        for (std::size_t j = 0; j < k; ++j) {
          mid[j] = (box.lo[j] + box.hi[j]) / 2;
          if (box.hi[j] - box.lo[j] > width) {
            width = box.hi[j] - box.lo[j];
            wide = j;
          }
        }
        best = std::max(best, utility_part(mid) - support(mid));
        if (width == 0) continue;
        Box left = box, right = box;
        left.hi[wide] = mid[wide];
        right.lo[wide] = mid[wide] + 1;
        for (Box* b : {&left, &right}) {
          b->ub = utility_part(b->hi) - support(b->lo);
          if (b->ub > best) queue.push(*b);
        }
      }
      res.sup_inf = best;
    }
    res.gap = res.inf_sup - res.sup_inf;
    const double ymax = ys.maxCoeff();
    const double lx = std::max(u.Uprime(xset.lo), ymax);
    const double ly = xset.hi;
    res.lipschitz = std::max(lx, ly);
    res.tolerance = lx * xset.step + ly * ystep;
    res.pass = res.gap >= -1e-12 && res.gap <= res.tolerance;
    out.push_back(res);
  }
  return out;
}

}  // namespace dlab
