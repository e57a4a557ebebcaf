#pragma once

#include <Eigen/Dense>

namespace dlab {

enum class LpStatus { kOptimal, kInfeasible, kUnbounded };

struct LpResult {
  LpStatus status = LpStatus::kInfeasible;
  Eigen::VectorXd x;
  double objective = 0.0;
};

/// Dense two-phase tableau simplex with Bland's rule:
///   maximize c'x  subject to  A x = b,  x >= 0.
/// Sized for desk-scale problems (a few hundred columns at most).
LpResult solve_standard_form_lp(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                const Eigen::VectorXd& c, double tol = 1e-11);

}  // namespace dlab
