#include "duality_lab/simplex.hpp"

#include <limits>
#include <vector>

#include "duality_lab/errors.hpp"

namespace dlab {

namespace {

// Tableau layout: rows 0..m-1 are constraints, column n_total holds the rhs.
class Tableau {
 public:
  Tableau(Eigen::MatrixXd t, std::vector<int> basis) : t_(std::move(t)), basis_(std::move(basis)) {}

  // Runs the simplex on objective row `cost` (maximize). Columns >= `allowed`
  // never enter. Returns false when unbounded.
  bool optimize(Eigen::VectorXd cost, int allowed, double tol) {
    const int m = static_cast<int>(t_.rows());
    const int rhs = static_cast<int>(t_.cols()) - 1;
    for (int iter = 0; iter < 50000; ++iter) {
      // reduced costs r_j = c_j - c_B' B^-1 A_j
      int entering = -1;
      for (int j = 0; j < allowed; ++j) {
        double r = cost(j);
        for (int i = 0; i < m; ++i) r -= cost(basis_[static_cast<std::size_t>(i)]) * t_(i, j);
        if (r > tol) {
          entering = j;  // Bland: smallest index
          break;
        }
      }
      if (entering < 0) return true;
      int leaving = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i) {
        if (t_(i, entering) > tol) {
          const double ratio = t_(i, rhs) / t_(i, entering);
          if (ratio < best - 1e-15 ||
              (ratio <= best + 1e-15 && leaving >= 0 &&
               basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leaving)])) {
            best = ratio;
            leaving = i;
          }
        }
      }
      if (leaving < 0) return false;
      pivot(leaving, entering);
    }
    throw SolverError("market_model", "simplex iteration limit reached");
  }

  void pivot(int row, int col) {
    t_.row(row) /= t_(row, col);
    for (int i = 0; i < t_.rows(); ++i) {
      if (i != row && t_(i, col) != 0.0) t_.row(i) -= t_(i, col) * t_.row(row);
    }
    basis_[static_cast<std::size_t>(row)] = col;
  }

  Eigen::MatrixXd& table() { return t_; }
  std::vector<int>& basis() { return basis_; }

 private:
  Eigen::MatrixXd t_;
  std::vector<int> basis_;
};

}  // namespace

LpResult solve_standard_form_lp(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                const Eigen::VectorXd& c, double tol) {
  const int m = static_cast<int>(a.rows());
  const int n = static_cast<int>(a.cols());
  if (b.size() != m || c.size() != n) throw InvalidInput("market_model", "LP dimension mismatch");

  // Phase 1: append one artificial per row, rows flipped so that b >= 0.
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, n + m + 1);
  std::vector<int> basis(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const double sign = b(i) < 0 ? -1.0 : 1.0;
    t.row(i).head(n) = sign * a.row(i);
    t(i, n + i) = 1.0;
    t(i, n + m) = sign * b(i);
    basis[static_cast<std::size_t>(i)] = n + i;
  }
  Tableau tableau(std::move(t), std::move(basis));
  Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n + m);
  phase1.tail(m).setConstant(-1.0);
  tableau.optimize(phase1, n + m, tol);

  LpResult result;
  double infeasibility = 0.0;
  for (int i = 0; i < m; ++i) {
    if (tableau.basis()[static_cast<std::size_t>(i)] >= n) infeasibility += tableau.table()(i, n + m);
  }
  if (infeasibility > 1e-9) {
    result.status = LpStatus::kInfeasible;
    return result;
  }
  // Drive degenerate artificials out of the basis where possible.
  for (int i = 0; i < m; ++i) {
    if (tableau.basis()[static_cast<std::size_t>(i)] < n) continue;
    for (int j = 0; j < n; ++j) {
      if (std::abs(tableau.table()(i, j)) > 1e-9) {
        tableau.pivot(i, j);
        break;
      }
    }
  }

  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(n + m);
  phase2.head(n) = c;
  // artificials still basic sit on redundant rows at value zero
  if (!tableau.optimize(phase2, n, tol)) {
    result.status = LpStatus::kUnbounded;
    return result;
  }
  result.status = LpStatus::kOptimal;
  result.x = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < m; ++i) {
    const int j = tableau.basis()[static_cast<std::size_t>(i)];
    if (j < n) result.x(j) = tableau.table()(i, n + m);
  }
  result.objective = c.dot(result.x);
  return result;
}

}  // namespace dlab
