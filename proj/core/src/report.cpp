#include "report.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include <fmt/format.h>

#include "duality_lab/errors.hpp"

namespace dlab::report {

Json number(double x) {
  if (!std::isfinite(x)) return nullptr;
  if (x == 0.0) return 0.0;  // drop the sign of -0
  // Round-trip through a 12-digit rendering; the serializer then prints the
  // shortest representation of the rounded double.
  return std::stod(fmt::format("{:.12g}", x));
}

Json numbers(const std::vector<double>& xs) {
  Json arr = Json::array();
  for (double x : xs) arr.push_back(number(x));
  return arr;
}

Json numbers(const RandomVariable& x) { return numbers(x.vector()); }

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json to_json(const ConjugacyReport& r, double tolerance) {
  Json entries = Json::array();
  for (const auto& e : r.entries) {
    entries.push_back(Json{{"eta", number(e.eta)},
                           {"atom", e.atom},
                           {"v", number(e.v)},
                           {"grid_max", number(e.grid_max)},
                           {"xi_argmax", number(e.xi_argmax)},
                           {"residual", number(e.residual)},
                           {"refined_max", number(e.refined_max)},
                           {"refined_residual", number(e.refined_residual)}});
  }
  return Json{{"grid_points", r.grid_points},
              {"max_residual", number(r.max_residual)},
              {"max_refined_residual", number(r.max_refined_residual)},
              {"tolerance", number(tolerance)},
              {"pass", r.max_refined_residual <= tolerance},
              {"entries", entries}};
}

Json to_json(const VCompactnessReport& r) {
  return Json{{"bound", number(r.bound)},
              {"last_ratio", number(r.last_ratio)},
              {"ratio_limit", 1.05},
              {"unbounded", r.unbounded},
              {"pass", r.pass},
              {"note", r.note},
              {"moments", numbers(r.moments)}};
}

Json to_json(const ConvergenceReport& r) {
  return Json{{"slope", number(r.slope)},
              {"prediction_ratio", number(r.prediction_ratio)},
              {"monotone", r.monotone},
              {"pass", r.pass},
              {"distances", numbers(r.distances)},
              {"predicted", numbers(r.predicted)}};
}

Json to_json(const StabilityReport& r) {
  Json cols = Json::array();
  for (std::size_t c = 0; c < r.columns.size(); ++c) {
    cols.push_back(Json{{"column", r.columns[c]},
                        {"final", number(column_value(r.rows.back(), r.columns[c]))},
                        {"tolerance", number(r.tolerance)},
                        {"monotone", static_cast<bool>(r.column_monotone[c])},
                        {"final_ok", static_cast<bool>(r.column_final_ok[c])}});
  }
  double l1 = 0.0;
  for (const auto& row : r.rows) l1 = std::max(l1, row.dU_l1);
  return Json{{"rows", r.rows.size()},
              {"columns", cols},
              {"final_ducp", number(r.rows.back().ducp)},
              {"final_dU_l1", number(r.rows.back().dU_l1)},
              {"max_dU_l1", number(l1)},
              {"usc_ok", r.usc_ok},
              {"min_value", number(r.min_value)},
              {"pass", r.pass}};
}

Json to_json(const UniformConvergenceReport& r) {
  return Json{{"points", r.points},
              {"final_sup_gap_v", number(r.sup_gap_v.back())},
              {"final_sup_gap_vprime", number(r.sup_gap_vprime.back())},
              {"tolerance", number(r.tolerance)},
              {"alpha", number(r.alpha)},
              {"max_observed_slope", number(r.max_observed_slope)},
              {"lipschitz_ok", r.lipschitz_ok},
              {"lower_bound", number(r.lower_bound)},
              {"pass", r.pass},
              {"sup_gap_v", numbers(r.sup_gap_v)},
              {"sup_gap_vprime", numbers(r.sup_gap_vprime)}};
}

Json to_json(const MinimaxReport& r, double gap_tolerance) {
  Json atoms = Json::array();
  for (const auto& a : r.atoms) {
    Json cells = Json::array();
    for (const auto& c : a.cells) {
      cells.push_back(Json{{"step", number(c.step)},
                           {"truncation", number(c.truncation)},
                           {"sup_inf", number(c.result.sup_inf)},
                           {"inf_sup", number(c.result.inf_sup)},
                           {"gap", number(c.result.gap)},
                           {"gap_tolerance", number(gap_tolerance)},
                           {"lipschitz_tolerance", number(c.result.tolerance)},
                           {"y_points", c.result.y_points}});
    }
    atoms.push_back(Json{{"atom", a.atom},
                         {"eta", number(a.eta)},
                         {"v", number(a.v)},
                         {"conjugacy_residual", number(a.conjugacy_residual)},
                         {"min_gap", number(a.min_gap)},
                         {"gap_ok", a.gap_ok},
                         {"monotone_ok", a.monotone_ok},
                         {"limit_error", number(a.limit_error)},
                         {"limit_tolerance", number(a.limit_tolerance)},
                         {"limit_ok", a.limit_ok},
                         {"halving_ratio", numbers(a.halving_ratio)},
                         {"error_halving_ratio", numbers(a.error_halving_ratio)},
                         {"reconciliation", number(a.reconciliation)},
                         {"cells", cells}});
  }
  return Json{{"steps", numbers(r.steps)}, {"truncations", numbers(r.truncations)}, {"atoms", atoms}};
}

std::string stability_csv(const StabilityReport* r) {
  std::string out = "n,dZ,dXT,dXtau,du,dv,dvprime,ducp,tolerance\n";
  if (r == nullptr) return out;
  for (const auto& row : r->rows) {
    out += fmt::format("{},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g},{:.12g}\n", row.n, row.dZ, row.dXT,
                       row.dXtau, row.du, row.dv, row.dvprime, row.ducp, r->tolerance);
  }
  return out;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InvalidInput("cli", fmt::format("cannot write {}", path));
  f << text;
  if (!f) throw InvalidInput("cli", fmt::format("failed writing {}", path));
}

}  // namespace dlab::report
