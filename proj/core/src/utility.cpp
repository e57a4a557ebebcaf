#include "duality_lab/utility.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>

#include "duality_lab/errors.hpp"

namespace dlab {

namespace {

constexpr const char* kModule = "utility";

double hermite_slope(double a, double b, double ha, double hb) {
  const double w1 = 2.0 * hb + ha;
  const double w2 = hb + 2.0 * ha;
  return (w1 + w2) / (w1 / a + w2 / b);
}

}  // namespace

UtilityPair UtilityPair::log() {
  UtilityPair u;
  u.kind_ = UtilityKind::kLog;
  u.ae_bound_ = 0.5;
  u.alpha_ = 1.0;
  return u;
}

UtilityPair UtilityPair::power(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw InvalidInput(kModule, fmt::format("power utility needs 0 < p < 1, got {}", p));
  }
  UtilityPair u;
  u.kind_ = UtilityKind::kPower;
  u.p_ = p;
  u.ae_bound_ = p;
  u.alpha_ = p / (1.0 - p);
  return u;
}

UtilityPair UtilityPair::table(std::vector<std::pair<double, double>> points, double tail_exponent) {
  if (points.size() < 3) throw InvalidInput(kModule, "table utility needs at least 3 points");
  if (!(tail_exponent > 0.0 && tail_exponent < 1.0)) {
    throw InvalidInput(kModule, "table tail exponent must lie in (0, 1)");
  }
  std::sort(points.begin(), points.end());
  UtilityPair u;
  u.kind_ = UtilityKind::kTable;
  Table& tb = u.table_;
  tb.q = tail_exponent;
  for (const auto& [x, v] : points) {
    if (!(x > 0.0) || !std::isfinite(x) || !std::isfinite(v)) {
      throw InvalidInput(kModule, "table points need finite x > 0 and finite U");
    }
    if (!tb.x.empty() && x <= tb.x.back()) throw InvalidInput(kModule, "table x values must be distinct");
    tb.x.push_back(x);
    tb.u.push_back(v);
  }
  const std::size_t n = tb.x.size();
  std::vector<double> h(n - 1), delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = tb.x[i + 1] - tb.x[i];
    delta[i] = (tb.u[i + 1] - tb.u[i]) / h[i];
    if (!(delta[i] > 0.0)) throw InvalidInput(kModule, "table utility must be strictly increasing");
    if (i > 0 && !(delta[i] < delta[i - 1])) {
      throw InvalidInput(kModule, "table utility must be strictly concave");
    }
  }
  tb.d.resize(n);
  for (std::size_t i = 1; i + 1 < n; ++i) tb.d[i] = hermite_slope(delta[i - 1], delta[i], h[i - 1], h[i]);
  auto end_slope = [](double h0, double h1, double d0, double d1) {
    double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (d <= 0.0) d = 0.5 * d0;
    if (d > 3.0 * d0) d = 3.0 * d0;
    return d;
  };
  tb.d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
  tb.d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double left = (6.0 * delta[i] - 4.0 * tb.d[i] - 2.0 * tb.d[i + 1]) / h[i];
    const double right = (-6.0 * delta[i] + 2.0 * tb.d[i] + 4.0 * tb.d[i + 1]) / h[i];
    if (!(left < 0.0 && right < 0.0)) {
      throw InvalidInput(kModule, fmt::format("interpolated utility is not strictly concave on [{}, {}]",
                                              tb.x[i], tb.x[i + 1]));
    }
  }
  u.ae_bound_ = tail_exponent;
  u.alpha_ = tail_exponent / (1.0 - tail_exponent);
  return u;
}

std::string UtilityPair::name() const {
  switch (kind_) {
    case UtilityKind::kLog:
      return "log";
    case UtilityKind::kPower:
      return fmt::format("power(p={})", p_);
    case UtilityKind::kTable:
      return fmt::format("table({} points)", table_.x.size());
  }
  return "unknown";
}

int UtilityPair::segment(double x) const {
  const auto& xs = table_.x;
  if (x < xs.front()) return -1;
  if (x >= xs.back()) return static_cast<int>(xs.size()) - 1;
  return static_cast<int>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin()) - 1;
}

double UtilityPair::U(double x) const {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  switch (kind_) {
    case UtilityKind::kLog:
      return std::log(x);
    case UtilityKind::kPower:
      return std::pow(x, p_) / p_;
    case UtilityKind::kTable:
      break;
  }
  const Table& tb = table_;
  const int i = segment(x);
  const double q = tb.q;
  if (i < 0) return tb.u.front() + tb.d.front() * tb.x.front() / q * (std::pow(x / tb.x.front(), q) - 1.0);
  const auto k = static_cast<std::size_t>(i);
  if (k + 1 == tb.x.size()) return tb.u.back() + tb.d.back() * tb.x.back() / q * (std::pow(x / tb.x.back(), q) - 1.0);
  const double h = tb.x[k + 1] - tb.x[k];
  const double t = (x - tb.x[k]) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * tb.u[k] + (t3 - 2 * t2 + t) * h * tb.d[k] + (-2 * t3 + 3 * t2) * tb.u[k + 1] +
         (t3 - t2) * h * tb.d[k + 1];
}

double UtilityPair::U_increment(double x, double r) const {
  if (!(r > -1.0)) return -std::numeric_limits<double>::infinity();
  switch (kind_) {
    case UtilityKind::kLog:
      return std::log1p(r);
    case UtilityKind::kPower:
      return std::pow(x, p_) / p_ * std::expm1(p_ * std::log1p(r));
    case UtilityKind::kTable:
      break;
  }
  return U(x * (1.0 + r)) - U(x);
}

double UtilityPair::Uprime(double x) const {
  switch (kind_) {
    case UtilityKind::kLog:
      return 1.0 / x;
    case UtilityKind::kPower:
      return std::pow(x, p_ - 1.0);
    case UtilityKind::kTable:
      break;
  }
  const Table& tb = table_;
  const int i = segment(x);
  if (i < 0) return tb.d.front() * std::pow(x / tb.x.front(), tb.q - 1.0);
  const auto k = static_cast<std::size_t>(i);
  if (k + 1 == tb.x.size()) return tb.d.back() * std::pow(x / tb.x.back(), tb.q - 1.0);
  const double h = tb.x[k + 1] - tb.x[k];
  const double t = (x - tb.x[k]) / h;
  const double t2 = t * t;
  return (6 * t2 - 6 * t) / h * tb.u[k] + (3 * t2 - 4 * t + 1) * tb.d[k] + (-6 * t2 + 6 * t) / h * tb.u[k + 1] +
         (3 * t2 - 2 * t) * tb.d[k + 1];
}

double UtilityPair::Uprime2(double x) const {
  switch (kind_) {
    case UtilityKind::kLog:
      return -1.0 / (x * x);
    case UtilityKind::kPower:
      return (p_ - 1.0) * std::pow(x, p_ - 2.0);
    case UtilityKind::kTable:
      break;
  }
  const Table& tb = table_;
  const int i = segment(x);
  if (i < 0) return tb.d.front() * (tb.q - 1.0) / tb.x.front() * std::pow(x / tb.x.front(), tb.q - 2.0);
  const auto k = static_cast<std::size_t>(i);
  if (k + 1 == tb.x.size()) return tb.d.back() * (tb.q - 1.0) / tb.x.back() * std::pow(x / tb.x.back(), tb.q - 2.0);
  const double h = tb.x[k + 1] - tb.x[k];
  const double t = (x - tb.x[k]) / h;
  return ((12 * t - 6) * (tb.u[k] - tb.u[k + 1]) / h + (6 * t - 4) * tb.d[k] + (6 * t - 2) * tb.d[k + 1]) / h;
}

double UtilityPair::I(double y) const {
  switch (kind_) {
    case UtilityKind::kLog:
      return 1.0 / y;
    case UtilityKind::kPower:
      return std::pow(y, 1.0 / (p_ - 1.0));
    case UtilityKind::kTable:
      break;
  }
  const Table& tb = table_;
  if (y >= tb.d.front()) return tb.x.front() * std::pow(y / tb.d.front(), 1.0 / (tb.q - 1.0));
  if (y <= tb.d.back()) return tb.x.back() * std::pow(y / tb.d.back(), 1.0 / (tb.q - 1.0));
  std::size_t k = 0;
  while (k + 2 < tb.d.size() && tb.d[k + 1] > y) ++k;
  std::uintmax_t iters = 200;
  const auto root = boost::math::tools::toms748_solve([&](double x) { return Uprime(x) - y; }, tb.x[k],
                                                      tb.x[k + 1], boost::math::tools::eps_tolerance<double>(52),
                                                      iters);
  return 0.5 * (root.first + root.second);
}

double UtilityPair::V(double y) const {
  switch (kind_) {
    case UtilityKind::kLog:
      return -std::log(y) - 1.0;
    case UtilityKind::kPower:
      return (1.0 - p_) / p_ * std::pow(y, p_ / (p_ - 1.0));
    case UtilityKind::kTable:
      break;
  }
  const double x = I(y);
  return U(x) - x * y;
}

double UtilityPair::Vprime2(double y) const {
  switch (kind_) {
    case UtilityKind::kLog:
      return 1.0 / (y * y);
    case UtilityKind::kPower:
      return std::pow(y, (2.0 - p_) / (p_ - 1.0)) / (1.0 - p_);
    case UtilityKind::kTable:
      break;
  }
  return -1.0 / Uprime2(I(y));
}

double UtilityPair::V_plus(double y) const { return std::max(V(y), 0.0); }
double UtilityPair::V_minus(double y) const { return std::max(-V(y), 0.0); }

double UtilityPair::V_truncated(double y, double n) const {
  if (!(n > 0.0)) throw InvalidInput(kModule, "truncation level must be positive");
  const double x = I(y);
  if (x <= n) return V(y);
  return U(n) - n * y;
}

double conjugate_eval(const UtilityPair& u, double y) {
  if (!(y > 0.0) || !std::isfinite(y)) {
    throw InvalidInput(kModule, fmt::format("conjugate needs y > 0, got {}", y));
  }
  return u.V(y);
}

AeEstimate asymptotic_elasticity_estimate(const std::function<double(double)>& U,
                                          const std::function<double(double)>& Uprime) {
  AeEstimate est;
  for (int k = 2; k <= 8; ++k) {
    const double x = std::pow(10.0, k);
    const double value = U(x);
    if (!(value > 0.0)) continue;
    est.x.push_back(x);
    est.ratio.push_back(x * Uprime(x) / value);
  }
  if (est.ratio.empty()) {
    est.estimate = std::numeric_limits<double>::infinity();
    est.admissible = false;
    return est;
  }
  const std::size_t tail = est.ratio.size() > 4 ? est.ratio.size() - 4 : 0;
  est.estimate = *std::max_element(est.ratio.begin() + static_cast<std::ptrdiff_t>(tail), est.ratio.end());
  est.admissible = est.estimate < 1.0;
  return est;
}

AeEstimate asymptotic_elasticity_estimate(const UtilityPair& u) {
  return asymptotic_elasticity_estimate([&](double x) { return u.U(x); },
                                        [&](double x) { return u.Uprime(x); });
}

double dual_bound_threshold(const UtilityPair& u) {
  const double tol = 1e-9;
  double x0 = std::numeric_limits<double>::quiet_NaN();
  for (int k = 8; k >= -8; --k) {
    const double x = std::pow(10.0, k);
    const double value = u.U(x);
    if (!(value > 0.0)) break;
    if (x * u.Uprime(x) / value > u.ae_bound() * (1.0 + tol)) break;
    x0 = x;
  }
  if (std::isnan(x0)) throw ModelError(kModule, "no decade satisfies the elasticity bound; y0 undefined");
  return u.Uprime(x0);
}

bool ae_dual_bound_check(const UtilityPair& u, double mu, double y, double alpha, double boundary_tol) {
  if (!(mu > 0.0 && mu < 1.0)) throw InvalidInput(kModule, fmt::format("mu must lie in (0, 1), got {}", mu));
  const double y0 = dual_bound_threshold(u);
  if (!(y > 0.0) || y > y0 * (1.0 + 1e-12)) {
    throw InvalidInput(kModule, fmt::format("y = {} outside (0, y0 = {}]", y, y0));
  }
  const double a = alpha > 0.0 ? alpha : u.alpha();
  const double lhs = u.V(mu * y);
  const double rhs = std::pow(mu, -a) * u.V(y);
  if (lhs < rhs) return true;
  if (boundary_tol <= 0.0) return false;
  return std::abs(lhs - rhs) <= boundary_tol * std::max(1.0, std::abs(rhs));
}

}  // namespace dlab
