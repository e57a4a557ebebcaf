#pragma once

#include <functional>

#include <Eigen/Dense>

namespace dlab {

/// f(x) = sum_k w_k phi(z_k) with z = A x + b. `phi` returns +inf outside its
/// domain; `dphi` and `d2phi` are only evaluated inside it.
struct SeparableObjective {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd w;
  std::function<double(double)> phi;
  std::function<double(double)> dphi;
  std::function<double(double)> d2phi;
};

struct BarrierOptions {
  double t0 = 1.0;
  double t_factor = 5.0;         // barrier weight mu shrinks by 1 / t_factor per round
  double gap_tol = 1e-11;        // stop once (rows / t) falls below this
  double newton_tol = 1e-10;     // half squared Newton decrement
  int max_newton = 400;          // per centering step
  double unbounded_norm = 1e10;  // |x|_inf beyond this is taken as divergence
  double unbounded_value = -1e12;
  double active_tol = 1e-7;      // slack below which a row counts as active in the certificate
};

enum class BarrierStatus { kOptimal, kUnbounded, kStalled };

struct BarrierResult {
  BarrierStatus status = BarrierStatus::kStalled;
  Eigen::VectorXd x;
  double objective = 0.0;
  Eigen::VectorXd multipliers;  // nonnegative fit on the active rows
  double kkt_residual = 0.0;    // max(stationarity, complementarity, infeasibility)
  int newton_steps = 0;
};

/// Log-barrier interior point method for min f(x) s.t. G x < h. `x0` must
/// be strictly feasible and inside the domain of f.
BarrierResult minimize_with_barrier(const SeparableObjective& f, const Eigen::MatrixXd& G,
                                    const Eigen::VectorXd& h, Eigen::VectorXd x0,
                                    const BarrierOptions& opts = {});

}  // namespace dlab
