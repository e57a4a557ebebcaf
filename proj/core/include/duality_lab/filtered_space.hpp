#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace dlab {

/// A partition of the scenario index set {0, ..., N-1}: a list of disjoint
/// cells whose union is every scenario.
using Partition = std::vector<std::vector<int>>;

/// An element of L0 on a finite sample space: one real per scenario.
class RandomVariable {
 public:
  RandomVariable() = default;
  explicit RandomVariable(std::size_t n, double fill = 0.0) : values_(n, fill) {}
  explicit RandomVariable(std::vector<double> values) : values_(std::move(values)) {}
  RandomVariable(std::initializer_list<double> values) : values_(values) {}

  std::size_t size() const noexcept { return values_.size(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<const double> values() const noexcept { return values_; }
  const std::vector<double>& vector() const noexcept { return values_; }

  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  RandomVariable& operator+=(const RandomVariable& other);
  RandomVariable& operator-=(const RandomVariable& other);
  RandomVariable& operator*=(double c);

  friend RandomVariable operator+(RandomVariable a, const RandomVariable& b) { return a += b; }
  friend RandomVariable operator-(RandomVariable a, const RandomVariable& b) { return a -= b; }
  friend RandomVariable operator*(RandomVariable a, double c) { return a *= c; }
  friend RandomVariable operator*(double c, RandomVariable a) { return a *= c; }
  friend bool operator==(const RandomVariable&, const RandomVariable&) = default;

 private:
  std::vector<double> values_;
};

/// Pointwise product.
RandomVariable hadamard(const RandomVariable& a, const RandomVariable& b);

/// A [0, T]-valued random time, one entry per scenario. Validity against a
/// filtration is checked by FilteredSpace::is_stopping_time.
class StoppingTime {
 public:
  StoppingTime() = default;
  explicit StoppingTime(std::vector<int> tau) : tau_(std::move(tau)) {}

  static StoppingTime constant(std::size_t scenarios, int t) {
    return StoppingTime(std::vector<int>(scenarios, t));
  }

  std::size_t size() const noexcept { return tau_.size(); }
  int operator[](std::size_t i) const { return tau_[i]; }
  std::span<const int> values() const noexcept { return tau_; }

 private:
  std::vector<int> tau_;
};

/// A vertex of the scenario tree: the cell `cell` of partitions[t].
struct Node {
  int t = 0;
  int cell = 0;
  int parent = -1;              // -1 for cells of partitions[0]
  std::vector<int> children;    // node ids at t + 1
  std::vector<int> scenarios;   // sorted scenario indices
  double prob = 0.0;            // unconditional probability
};

/// One atom of a finite sigma-algebra. For F_tau the atom is the node where
/// the stopping time fires.
struct Atom {
  int node = -1;                // node id, or -1 for atoms not tied to the tree
  int time = 0;
  std::vector<int> scenarios;
  double prob = 0.0;
};

/// A finite sigma-algebra given by its atoms (for instance F_tau).
class SigmaAlgebra {
 public:
  SigmaAlgebra() = default;
  SigmaAlgebra(std::vector<Atom> atoms, std::size_t scenarios);

  std::size_t size() const noexcept { return atoms_.size(); }
  const Atom& atom(std::size_t a) const { return atoms_[a]; }
  const std::vector<Atom>& atoms() const noexcept { return atoms_; }
  int atom_of(int scenario) const { return atom_of_[static_cast<std::size_t>(scenario)]; }

  /// True iff x is constant on every atom (within `tol`).
  bool is_measurable(const RandomVariable& x, double tol = 0.0) const;
  /// Per-atom values of a measurable variable (value at the first scenario).
  std::vector<double> atom_values(const RandomVariable& x) const;
  /// Lift per-atom values to a scenario vector.
  RandomVariable lift(std::span<const double> per_atom) const;

 private:
  std::vector<Atom> atoms_;
  std::vector<int> atom_of_;
};

/// Finite filtered probability space: scenarios with strictly positive
/// weights and a refining chain of partitions F_0 ⊂ ... ⊂ F_T with F_T the
/// discrete partition. Immutable after construction.
class FilteredSpace {
 public:
  FilteredSpace(std::vector<double> prob, std::vector<Partition> partitions,
                std::vector<std::string> scenario_names = {});

  /// Every invariant violation of a candidate description (empty when valid).
  static std::vector<std::string> diagnose(const std::vector<double>& prob,
                                           const std::vector<Partition>& partitions);

  int horizon() const noexcept { return static_cast<int>(partitions_.size()) - 1; }
  std::size_t size() const noexcept { return prob_.size(); }
  const std::vector<double>& prob() const noexcept { return prob_; }
  const std::vector<std::string>& scenario_names() const noexcept { return names_; }
  const Partition& partition(int t) const { return partitions_.at(static_cast<std::size_t>(t)); }

  /// Index of the cell of partitions[t] that contains `scenario`.
  int cell_of(int t, int scenario) const;

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  int node_id(int t, int cell) const;
  /// Node id of the time-t vertex on the path of `scenario`.
  int node_of(int t, int scenario) const { return node_id(t, cell_of(t, scenario)); }

  /// F_t as a sigma-algebra.
  SigmaAlgebra sigma_at_time(int t) const;
  /// F_tau; throws InvalidInput if tau is not a stopping time.
  SigmaAlgebra sigma_at(const StoppingTime& tau) const;

  /// {tau <= t} is partitions[t]-measurable for every t and 0 <= tau <= T.
  bool is_stopping_time(std::span<const int> tau) const;

  double expectation(const RandomVariable& x) const;

 private:
  std::vector<double> prob_;
  std::vector<Partition> partitions_;
  std::vector<std::string> names_;
  std::vector<std::vector<int>> cell_index_;  // [t][scenario] -> cell
  std::vector<std::vector<int>> node_index_;  // [t][cell] -> node id
  std::vector<Node> nodes_;
};

/// E[x | G] on a finite space: the probability-weighted atom average.
RandomVariable cond_expect(const FilteredSpace& space, const RandomVariable& x,
                           const SigmaAlgebra& g);

enum class Extremum { kSup, kInf };

/// Per-atom max (or min) across a finite family of G-measurable variables.
/// Throws InvalidInput on an empty family or a non-measurable member.
RandomVariable essential_extremum(std::span<const RandomVariable> family, const SigmaAlgebra& g,
                                  Extremum mode);

bool check_stopping_time(const FilteredSpace& space, std::span<const int> tau);

}  // namespace dlab
