#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace dlab {

enum class UtilityKind { kLog, kPower, kTable };

/// A utility U on (0, inf) together with U', its inverse marginal I and the
/// convex conjugate V(y) = sup_x (U(x) - x y).
class UtilityPair {
 public:
  static UtilityPair log();
  /// U(x) = x^p / p with 0 < p < 1.
  static UtilityPair power(double p);
  /// Monotone cubic (Fritsch-Carlson) interpolation of (x, U(x)) samples,
  /// extended outside the table by power tails x^q (q = tail_exponent) that
  /// match U and U' at the end points. The samples must be strictly
  /// increasing and strictly concave.
  static UtilityPair table(std::vector<std::pair<double, double>> points,
                           double tail_exponent = 0.5);

  UtilityKind kind() const noexcept { return kind_; }
  std::string name() const;
  double p() const noexcept { return p_; }

  double U(double x) const;
  /// U(x (1 + r)) - U(x), free of cancellation for the closed-form kinds.
  double U_increment(double x, double r) const;
  double Uprime(double x) const;
  double Uprime2(double x) const;
  double I(double y) const;
  double V(double y) const;
  double Vprime(double y) const { return -I(y); }
  double Vprime2(double y) const;
  double V_plus(double y) const;
  double V_minus(double y) const;

  /// Truncated conjugate sup_{0 <= x <= n} (U(x) - x y).
  double V_truncated(double y, double n) const;

  /// Claimed asymptotic elasticity and the matching dual exponent.
  double ae_bound() const noexcept { return ae_bound_; }
  double alpha() const noexcept { return alpha_; }

 private:
  UtilityPair() = default;

  struct Table {
    std::vector<double> x, u, d;  // knots, values, slopes
    double q = 0.5;
  };
  int segment(double x) const;

  UtilityKind kind_ = UtilityKind::kLog;
  double p_ = 0.0;
  double ae_bound_ = 0.0;
  double alpha_ = 1.0;
  Table table_;
};

/// V(y); throws InvalidInput for y <= 0.
double conjugate_eval(const UtilityPair& u, double y);

struct AeEstimate {
  double estimate = 0.0;           // max of x U'(x) / U(x) over the tail decades
  std::vector<double> x;           // decade points where U > 0
  std::vector<double> ratio;       // x U'(x) / U(x) at those points
  bool admissible = true;          // estimate < 1
};

/// Asymptotic elasticity over x = 10^k, k = 2..8, restricted to U > 0. The
/// estimate is the largest ratio among the last four decades.
AeEstimate asymptotic_elasticity_estimate(const std::function<double(double)>& U,
                                          const std::function<double(double)>& Uprime);
AeEstimate asymptotic_elasticity_estimate(const UtilityPair& u);

/// y0 = U'(x0), with x0 the smallest decade 10^k (k = -8..8, U > 0) from which
/// on every decade satisfies x U'(x) / U(x) <= ae_bound.
double dual_bound_threshold(const UtilityPair& u);

/// V(mu y) < mu^{-alpha} V(y), with equality accepted at relative tolerance
/// `boundary_tol`. `alpha` defaults to the pair's exponent. Throws
/// InvalidInput unless 0 < mu < 1 and 0 < y <= y0.
bool ae_dual_bound_check(const UtilityPair& u, double mu, double y, double alpha = 0.0,
                         double boundary_tol = 1e-9);

}  // namespace dlab
