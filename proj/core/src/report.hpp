#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "duality_lab/conditional_duality.hpp"
#include "duality_lab/minimax_bridge.hpp"
#include "duality_lab/stability_lab.hpp"

namespace dlab::report {

using Json = nlohmann::ordered_json;

/// Rounded to 12 significant digits; null when not finite.
Json number(double x);
Json numbers(const std::vector<double>& xs);
Json numbers(const RandomVariable& x);

/// Two-space indented JSON with a trailing LF.
std::string dump(const Json& j);

Json to_json(const ConjugacyReport& r, double tolerance);
Json to_json(const VCompactnessReport& r);
Json to_json(const ConvergenceReport& r);
Json to_json(const StabilityReport& r);
Json to_json(const UniformConvergenceReport& r);
Json to_json(const MinimaxReport& r, double gap_tolerance);

/// CSV of the stability rows: n, dZ, dXT, dXtau, du, dv, dvprime, ducp, tolerance.
std::string stability_csv(const StabilityReport* r);

/// Writes `text` verbatim (binary mode, so LF stays LF). Throws InvalidInput.
void write_file(const std::string& path, const std::string& text);

}  // namespace dlab::report
