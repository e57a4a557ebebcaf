#include "duality_lab/barrier_solver.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "duality_lab/errors.hpp"

namespace dlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double objective_value(const SeparableObjective& f, const Eigen::VectorXd& z) {
  double acc = 0.0;
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    const double v = f.phi(z(k));
    if (!std::isfinite(v)) return kInf;
    acc += f.w(k) * v;
  }
  return acc;
}

// t f(x) - sum log(h - G x); +inf outside the strict interior.
double merit(const SeparableObjective& f, const Eigen::MatrixXd& G, const Eigen::VectorXd& h,
             const Eigen::VectorXd& x, double t) {
  const Eigen::VectorXd s = h - G * x;
  double barrier = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (!(s(i) > 0.0)) return kInf;
    barrier -= std::log(s(i));
  }
  const double fx = objective_value(f, f.A * x + f.b);
  if (!std::isfinite(fx)) return kInf;
  return t * fx + barrier;
}

Eigen::VectorXd solve_newton(const Eigen::MatrixXd& H, const Eigen::VectorXd& g) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    Eigen::VectorXd dx = ldlt.solve(-g);
    if (dx.allFinite()) return dx;
  }
  return H.completeOrthogonalDecomposition().solve(-g);
}

// Lawson-Hanson: min |C l - d| subject to l >= 0.
Eigen::VectorXd nnls(const Eigen::MatrixXd& C, const Eigen::VectorXd& d) {
  const Eigen::Index n = C.cols();
  Eigen::VectorXd l = Eigen::VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  const double tol = 1e-14 * std::max(1.0, C.lpNorm<Eigen::Infinity>() * d.lpNorm<Eigen::Infinity>());
  for (int outer = 0; outer < 3 * n + 10; ++outer) {
    const Eigen::VectorXd w = C.transpose() * (d - C * l);
    Eigen::Index best = -1;
    double best_w = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
        best_w = w(j);
        best = j;
      }
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;
    for (int inner = 0; inner < 3 * n + 10; ++inner) {
      std::vector<Eigen::Index> idx;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
      }
      Eigen::MatrixXd Cp(C.rows(), static_cast<Eigen::Index>(idx.size()));
      for (std::size_t k = 0; k < idx.size(); ++k) Cp.col(static_cast<Eigen::Index>(k)) = C.col(idx[k]);
      const Eigen::VectorXd z = Cp.completeOrthogonalDecomposition().solve(d);
      if ((z.array() > 0.0).all()) {
        l.setZero();
        for (std::size_t k = 0; k < idx.size(); ++k) l(idx[k]) = z(static_cast<Eigen::Index>(k));
        break;
      }
      double alpha = 1.0;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const double zk = z(static_cast<Eigen::Index>(k));
        if (zk <= 0.0) alpha = std::min(alpha, l(idx[k]) / (l(idx[k]) - zk));
      }
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const Eigen::Index j = idx[k];
        l(j) += alpha * (z(static_cast<Eigen::Index>(k)) - l(j));
        if (l(j) <= 1e-300) {
          l(j) = 0.0;
          passive[static_cast<std::size_t>(j)] = false;
        }
      }
    }
  }
  return l;
}

}  // namespace

BarrierResult minimize_with_barrier(const SeparableObjective& f, const Eigen::MatrixXd& G,
                                    const Eigen::VectorXd& h, Eigen::VectorXd x0,
                                    const BarrierOptions& opts) {
  const Eigen::Index n = x0.size();
  const Eigen::Index m = G.rows();
  if (!std::isfinite(merit(f, G, h, x0, 1.0))) {
    throw InvalidInput("barrier_solver", "starting point is not strictly feasible");
  }
  BarrierResult res;
  Eigen::VectorXd x = std::move(x0);
  double t = opts.t0;
  const double rows = std::max<double>(1.0, static_cast<double>(m));

  for (;;) {
    // Centering by damped Newton.
    for (int it = 0; it < opts.max_newton; ++it) {
      const Eigen::VectorXd z = f.A * x + f.b;
      const Eigen::VectorXd s = h - G * x;
      Eigen::VectorXd d1(z.size()), d2(z.size());
      for (Eigen::Index k = 0; k < z.size(); ++k) {
        d1(k) = f.w(k) * f.dphi(z(k));
        d2(k) = f.w(k) * f.d2phi(z(k));
      }
      const Eigen::VectorXd inv_s = s.cwiseInverse();
      Eigen::VectorXd grad = t * (f.A.transpose() * d1) + G.transpose() * inv_s;
      Eigen::MatrixXd hess = t * (f.A.transpose() * d2.asDiagonal() * f.A) +
                             G.transpose() * inv_s.cwiseAbs2().asDiagonal() * G;
      const Eigen::VectorXd dx = solve_newton(hess, grad);
      const double dec = -grad.dot(dx);
      ++res.newton_steps;
      if (!(dec > 0.0) || 0.5 * dec <= opts.newton_tol) break;
      const double f0 = merit(f, G, h, x, t);
      double step = 1.0;
      bool moved = false;
      while (step > 1e-14) {
        const Eigen::VectorXd trial = x + step * dx;
        const double ft = merit(f, G, h, trial, t);
        if (ft <= f0 - 0.25 * step * dec) {
          x = trial;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
      if (x.lpNorm<Eigen::Infinity>() > opts.unbounded_norm) {
        res.status = BarrierStatus::kUnbounded;
        res.x = x;
        res.objective = objective_value(f, f.A * x + f.b);
        return res;
      }
    }

    const double fx = objective_value(f, f.A * x + f.b);
    if (fx < opts.unbounded_value || x.lpNorm<Eigen::Infinity>() > opts.unbounded_norm) {
      res.status = BarrierStatus::kUnbounded;
      res.x = x;
      res.objective = fx;
      return res;
    }
    if (rows / t < opts.gap_tol) break;
    t *= opts.t_factor;
  }

  const Eigen::VectorXd z = f.A * x + f.b;
  const Eigen::VectorXd s = h - G * x;
  Eigen::VectorXd d1(z.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) d1(k) = f.w(k) * f.dphi(z(k));
  // Multiplier estimate on the nearly active rows. Degenerate active sets
  // make the central-path estimate 1 / (t s) converge slowly, so the KKT
  // certificate uses a nonnegative least-squares fit instead.
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (s(i) <= opts.active_tol * (1.0 + std::abs(h(i)))) active.push_back(i);
  }
  const Eigen::VectorXd grad_f = f.A.transpose() * d1;
  res.multipliers = Eigen::VectorXd::Zero(m);
  if (!active.empty()) {
    Eigen::MatrixXd C(n, static_cast<Eigen::Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) C.col(static_cast<Eigen::Index>(k)) = G.row(active[k]).transpose();
    const Eigen::VectorXd l = nnls(C, -grad_f);
    for (std::size_t k = 0; k < active.size(); ++k) res.multipliers(active[k]) = l(static_cast<Eigen::Index>(k));
  }
  const Eigen::VectorXd stationarity = grad_f + G.transpose() * res.multipliers;
  double infeasible = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) infeasible = std::max(infeasible, -s(i));
  double complementarity = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    complementarity = std::max(complementarity, res.multipliers(i) * s(i));
  }
  res.kkt_residual = std::max({n > 0 ? stationarity.lpNorm<Eigen::Infinity>() : 0.0, complementarity, infeasible});
  res.x = x;
  res.objective = objective_value(f, z);
  res.status = BarrierStatus::kOptimal;
  return res;
}

}  // namespace dlab
