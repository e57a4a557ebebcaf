#include "duality_lab/filtered_space.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "duality_lab/errors.hpp"

namespace dlab {

namespace {
constexpr const char* kModule = "filtered_space";
}

RandomVariable& RandomVariable::operator+=(const RandomVariable& other) {
  if (other.size() != size()) throw InvalidInput(kModule, "size mismatch in addition");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

RandomVariable& RandomVariable::operator-=(const RandomVariable& other) {
  if (other.size() != size()) throw InvalidInput(kModule, "size mismatch in subtraction");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

RandomVariable& RandomVariable::operator*=(double c) {
  for (double& v : values_) v *= c;
  return *this;
}

RandomVariable hadamard(const RandomVariable& a, const RandomVariable& b) {
  if (a.size() != b.size()) throw InvalidInput(kModule, "size mismatch in product");
  RandomVariable out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

SigmaAlgebra::SigmaAlgebra(std::vector<Atom> atoms, std::size_t scenarios)
    : atoms_(std::move(atoms)), atom_of_(scenarios, -1) {
  for (std::size_t a = 0; a < atoms_.size(); ++a) {
    for (int s : atoms_[a].scenarios) {
      if (s < 0 || static_cast<std::size_t>(s) >= scenarios || atom_of_[static_cast<std::size_t>(s)] != -1) {
        throw InvalidInput(kModule, "atoms must partition the scenario set");
      }
      atom_of_[static_cast<std::size_t>(s)] = static_cast<int>(a);
    }
  }
  if (std::find(atom_of_.begin(), atom_of_.end(), -1) != atom_of_.end()) {
    throw InvalidInput(kModule, "atoms must cover every scenario");
  }
}

bool SigmaAlgebra::is_measurable(const RandomVariable& x, double tol) const {
  if (x.size() != atom_of_.size()) return false;
  for (const Atom& a : atoms_) {
    const double first = x[static_cast<std::size_t>(a.scenarios.front())];
    for (int s : a.scenarios) {
      if (std::abs(x[static_cast<std::size_t>(s)] - first) > tol) return false;
    }
  }
  return true;
}

std::vector<double> SigmaAlgebra::atom_values(const RandomVariable& x) const {
  std::vector<double> out;
  out.reserve(atoms_.size());
  for (const Atom& a : atoms_) out.push_back(x[static_cast<std::size_t>(a.scenarios.front())]);
  return out;
}

RandomVariable SigmaAlgebra::lift(std::span<const double> per_atom) const {
  if (per_atom.size() != atoms_.size()) throw InvalidInput(kModule, "one value per atom expected");
  RandomVariable out(atom_of_.size());
  for (std::size_t a = 0; a < atoms_.size(); ++a) {
    for (int s : atoms_[a].scenarios) out[static_cast<std::size_t>(s)] = per_atom[a];
  }
  return out;
}

std::vector<std::string> FilteredSpace::diagnose(const std::vector<double>& prob,
                                                 const std::vector<Partition>& partitions) {
  std::vector<std::string> issues;
  const std::size_t n = prob.size();
  if (n == 0) issues.emplace_back("prob: at least one scenario is required");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(prob[i] > 0.0) || !std::isfinite(prob[i])) {
      issues.push_back(fmt::format("prob[{}]: weight must be strictly positive, got {}", i, prob[i]));
    }
    total += prob[i];
  }
  if (n > 0 && std::abs(total - 1.0) > 1e-12) {
    issues.push_back(fmt::format("prob: weights must sum to 1, got {:.12g}", total));
  }
  if (partitions.empty()) {
    issues.emplace_back("partitions: at least partitions[0] is required");
    return issues;
  }

  // cell index per time, or -1 when the partition is malformed
  std::vector<std::vector<int>> owner(partitions.size(), std::vector<int>(n, -1));
  std::vector<bool> well_formed(partitions.size(), true);
  for (std::size_t t = 0; t < partitions.size(); ++t) {
    for (std::size_t c = 0; c < partitions[t].size(); ++c) {
      if (partitions[t][c].empty()) {
        issues.push_back(fmt::format("partitions[{}][{}]: empty cell", t, c));
        well_formed[t] = false;
      }
      for (int s : partitions[t][c]) {
        if (s < 0 || static_cast<std::size_t>(s) >= n) {
          issues.push_back(fmt::format("partitions[{}][{}]: scenario index {} out of range", t, c, s));
          well_formed[t] = false;
        } else if (owner[t][static_cast<std::size_t>(s)] != -1) {
          issues.push_back(fmt::format("partitions[{}]: scenario {} appears in two cells", t, s));
          well_formed[t] = false;
        } else {
          owner[t][static_cast<std::size_t>(s)] = static_cast<int>(c);
        }
      }
    }
    for (std::size_t s = 0; s < n; ++s) {
      if (owner[t][s] == -1) {
        issues.push_back(fmt::format("partitions[{}]: scenario {} is not covered", t, s));
        well_formed[t] = false;
      }
    }
  }
  for (std::size_t t = 0; t + 1 < partitions.size(); ++t) {
    if (!well_formed[t] || !well_formed[t + 1]) continue;
    for (std::size_t c = 0; c < partitions[t + 1].size(); ++c) {
      const auto& cell = partitions[t + 1][c];
      const int parent = owner[t][static_cast<std::size_t>(cell.front())];
      for (int s : cell) {
        if (owner[t][static_cast<std::size_t>(s)] != parent) {
          issues.push_back(fmt::format(
              "partitions[{}][{}] does not refine partitions[{}]: the cell at t={} straddles two cells of t={}",
              t + 1, c, t, t + 1, t));
          break;
        }
      }
    }
  }
  const std::size_t last = partitions.size() - 1;
  if (well_formed[last] && partitions[last].size() != n) {
    issues.push_back(fmt::format("partitions[{}]: the terminal partition must consist of singletons", last));
  }
  return issues;
}

FilteredSpace::FilteredSpace(std::vector<double> prob, std::vector<Partition> partitions,
                             std::vector<std::string> scenario_names)
    : prob_(std::move(prob)), partitions_(std::move(partitions)), names_(std::move(scenario_names)) {
  const auto issues = diagnose(prob_, partitions_);
  if (!issues.empty()) throw InvalidInput(kModule, issues.front());
  if (names_.empty()) {
    for (std::size_t i = 0; i < prob_.size(); ++i) names_.push_back(fmt::format("w{}", i));
  } else if (names_.size() != prob_.size()) {
    throw InvalidInput(kModule, "one scenario name per probability weight expected");
  }
  for (auto& partition : partitions_) {
    for (auto& cell : partition) std::sort(cell.begin(), cell.end());
  }

  cell_index_.assign(partitions_.size(), std::vector<int>(prob_.size(), -1));
  node_index_.resize(partitions_.size());
  for (std::size_t t = 0; t < partitions_.size(); ++t) {
    node_index_[t].resize(partitions_[t].size());
    for (std::size_t c = 0; c < partitions_[t].size(); ++c) {
      Node node;
      node.t = static_cast<int>(t);
      node.cell = static_cast<int>(c);
      node.scenarios = partitions_[t][c];
      for (int s : node.scenarios) {
        cell_index_[t][static_cast<std::size_t>(s)] = static_cast<int>(c);
        node.prob += prob_[static_cast<std::size_t>(s)];
      }
      node_index_[t][c] = static_cast<int>(nodes_.size());
      nodes_.push_back(std::move(node));
    }
  }
  for (Node& node : nodes_) {
    if (node.t == 0) continue;
    const int parent_cell = cell_index_[static_cast<std::size_t>(node.t - 1)]
                                       [static_cast<std::size_t>(node.scenarios.front())];
    node.parent = node_index_[static_cast<std::size_t>(node.t - 1)][static_cast<std::size_t>(parent_cell)];
  }
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].parent >= 0) {
      nodes_[static_cast<std::size_t>(nodes_[id].parent)].children.push_back(static_cast<int>(id));
    }
  }
}

int FilteredSpace::cell_of(int t, int scenario) const {
  return cell_index_.at(static_cast<std::size_t>(t)).at(static_cast<std::size_t>(scenario));
}

int FilteredSpace::node_id(int t, int cell) const {
  return node_index_.at(static_cast<std::size_t>(t)).at(static_cast<std::size_t>(cell));
}

SigmaAlgebra FilteredSpace::sigma_at_time(int t) const {
  if (t < 0 || t > horizon()) throw InvalidInput(kModule, fmt::format("time {} outside [0, T]", t));
  std::vector<Atom> atoms;
  for (std::size_t c = 0; c < partitions_[static_cast<std::size_t>(t)].size(); ++c) {
    const int id = node_id(t, static_cast<int>(c));
    atoms.push_back(Atom{id, t, nodes_[static_cast<std::size_t>(id)].scenarios,
                         nodes_[static_cast<std::size_t>(id)].prob});
  }
  return SigmaAlgebra(std::move(atoms), size());
}

SigmaAlgebra FilteredSpace::sigma_at(const StoppingTime& tau) const {
  if (!is_stopping_time(tau.values())) throw InvalidInput(kModule, "tau is not a stopping time");
  // The atom of scenario w is the cell of partitions[tau(w)] containing w;
  // {tau = t} is F_t-measurable so that whole cell fires at t.
  std::vector<Atom> atoms;
  std::vector<bool> seen(nodes_.size(), false);
  for (std::size_t s = 0; s < size(); ++s) {
    const int t = tau[s];
    const int id = node_of(t, static_cast<int>(s));
    if (seen[static_cast<std::size_t>(id)]) continue;
    seen[static_cast<std::size_t>(id)] = true;
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    atoms.push_back(Atom{id, t, node.scenarios, node.prob});
  }
  return SigmaAlgebra(std::move(atoms), size());
}

bool FilteredSpace::is_stopping_time(std::span<const int> tau) const {
  if (tau.size() != size()) return false;
  const int horizon_t = horizon();
  for (int v : tau) {
    if (v < 0 || v > horizon_t) return false;
  }
  for (int t = 0; t <= horizon_t; ++t) {
    for (const auto& cell : partitions_[static_cast<std::size_t>(t)]) {
      const bool first = tau[static_cast<std::size_t>(cell.front())] <= t;
      for (int s : cell) {
        if ((tau[static_cast<std::size_t>(s)] <= t) != first) return false;
      }
    }
  }
  return true;
}

double FilteredSpace::expectation(const RandomVariable& x) const {
  if (x.size() != size()) throw InvalidInput(kModule, "random variable has the wrong length");
  double acc = 0.0;
  for (std::size_t s = 0; s < size(); ++s) acc += prob_[s] * x[s];
  return acc;
}

RandomVariable cond_expect(const FilteredSpace& space, const RandomVariable& x,
                           const SigmaAlgebra& g) {
  if (x.size() != space.size()) throw InvalidInput(kModule, "random variable has the wrong length");
  std::vector<double> per_atom;
  per_atom.reserve(g.size());
  for (const Atom& atom : g.atoms()) {
    double mass = 0.0;
    double acc = 0.0;
    for (int s : atom.scenarios) {
      const double p = space.prob()[static_cast<std::size_t>(s)];
      mass += p;
      acc += p * x[static_cast<std::size_t>(s)];
    }
    per_atom.push_back(acc / mass);
  }
  return g.lift(per_atom);
}

RandomVariable essential_extremum(std::span<const RandomVariable> family, const SigmaAlgebra& g,
                                  Extremum mode) {
  if (family.empty()) throw InvalidInput(kModule, "essential extremum of an empty family");
  for (const auto& member : family) {
    if (!g.is_measurable(member)) {
      throw InvalidInput(kModule, "family members must be measurable with respect to G");
    }
  }
  std::vector<double> best = g.atom_values(family.front());
  for (std::size_t k = 1; k < family.size(); ++k) {
    const auto vals = g.atom_values(family[k]);
    for (std::size_t a = 0; a < best.size(); ++a) {
      best[a] = mode == Extremum::kSup ? std::max(best[a], vals[a]) : std::min(best[a], vals[a]);
    }
  }
  return g.lift(best);
}

bool check_stopping_time(const FilteredSpace& space, std::span<const int> tau) {
  return space.is_stopping_time(tau);
}

}  // namespace dlab
