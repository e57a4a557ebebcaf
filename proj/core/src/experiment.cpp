#include "duality_lab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "duality_lab/analysis_toolkit.hpp"
#include "duality_lab/conditional_duality.hpp"
#include "duality_lab/errors.hpp"
#include "duality_lab/market_model.hpp"
#include "duality_lab/minimax_bridge.hpp"
#include "duality_lab/stability_lab.hpp"
#include "duality_lab/utility.hpp"
#include "duality_lab/worker_pool.hpp"
#include "report.hpp"

namespace dlab {

namespace {

using report::Json;

const std::set<std::string> kChecks{"duality", "stability", "nets", "minimax"};

// Collects every violation instead of stopping at the first one.
class Reader {
 public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  void fail(const std::string& path, const std::string& what) { errors_.push_back(fmt::format("{}: {}", path, what)); }

  void keys(const Json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    for (const auto& [k, v] : j.items()) {
      (void)v;
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; })) {
        fail(path.empty() ? k : path + "." + k, "unknown key");
      }
    }
  }

  std::optional<double> number(const Json& j, const std::string& path) {
    if (!j.is_number()) {
      fail(path, "expected a number");
      return std::nullopt;
    }
    const double x = j.get<double>();
    if (!std::isfinite(x)) {
      fail(path, "must be finite");
      return std::nullopt;
    }
    return x;
  }

  std::optional<long long> integer(const Json& j, const std::string& path) {
    if (!j.is_number_integer()) {
      fail(path, "expected an integer");
      return std::nullopt;
    }
    return j.get<long long>();
  }

  std::optional<std::vector<double>> numbers(const Json& j, const std::string& path) {
    if (!j.is_array()) {
      fail(path, "expected an array of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    bool ok = true;
    for (std::size_t i = 0; i < j.size(); ++i) {
      auto x = number(j[i], fmt::format("{}[{}]", path, i));
      if (x) out.push_back(*x); else ok = false;
    }
    if (!ok) return std::nullopt;
    return out;
  }

  std::optional<std::string> string(const Json& j, const std::string& path) {
    if (!j.is_string()) {
      fail(path, "expected a string");
      return std::nullopt;
    }
    return j.get<std::string>();
  }

  std::optional<bool> boolean(const Json& j, const std::string& path) {
    if (!j.is_boolean()) {
      fail(path, "expected true or false");
      return std::nullopt;
    }
    return j.get<bool>();
  }

  // A number (constant) or one value per cell of `part`.
  std::optional<RandomVariable> per_cell(const Json& j, const Partition& part, std::size_t n,
                                         const std::string& path) {
    if (j.is_number()) {
      auto x = number(j, path);
      if (!x) return std::nullopt;
      return RandomVariable(n, *x);
    }
    auto xs = numbers(j, path);
    if (!xs) return std::nullopt;
    if (xs->size() != part.size()) {
      fail(path, fmt::format("expected {} values (one per cell), got {}", part.size(), xs->size()));
      return std::nullopt;
    }
    RandomVariable out(n);
    for (std::size_t c = 0; c < part.size(); ++c) {
      for (int s : part[c]) out[static_cast<std::size_t>(s)] = (*xs)[c];
    }
    return out;
  }

  // A number, or one entry per period each given per cell of partitions[t - 1 + offset].
  std::optional<std::vector<RandomVariable>> per_period(const Json& j, const FilteredSpace& sp, int offset,
                                                        const std::string& path) {
    const auto T = static_cast<std::size_t>(sp.horizon());
    if (j.is_number()) {
      auto x = number(j, path);
      if (!x) return std::nullopt;
      return std::vector<RandomVariable>(T, RandomVariable(sp.size(), *x));
    }
    if (!j.is_array() || j.size() != T) {
      fail(path, fmt::format("expected a number or an array of {} periods", T));
      return std::nullopt;
    }
    std::vector<RandomVariable> out;
    bool ok = true;
    for (std::size_t t = 1; t <= T; ++t) {
      auto rv = per_cell(j[t - 1], sp.partition(static_cast<int>(t) - 1 + offset), sp.size(),
                         fmt::format("{}[{}]", path, t - 1));
      if (rv) out.push_back(*rv); else ok = false;
    }
    if (!ok) return std::nullopt;
    return out;
  }

  // A number or one value per atom.
  std::optional<std::vector<double>> per_atom(const Json& j, std::size_t atoms, const std::string& path) {
    if (j.is_number()) {
      auto x = number(j, path);
      if (!x) return std::nullopt;
      return std::vector<double>(atoms, *x);
    }
    auto xs = numbers(j, path);
    if (!xs) return std::nullopt;
    if (xs->size() != atoms) {
      fail(path, fmt::format("expected {} values (one per atom of F_tau), got {}", atoms, xs->size()));
      return std::nullopt;
    }
    return xs;
  }

 private:
  std::vector<std::string>& errors_;
};

UtilityPair make_utility(const UtilitySpec& s) {
  if (s.kind == "log") return UtilityPair::log();
  if (s.kind == "power") return UtilityPair::power(s.p);
  return UtilityPair::table(s.points, s.tail_exponent);
}

std::optional<std::vector<Partition>> read_partitions(Reader& rd, const Json& j) {
  if (!j.is_array() || j.empty()) {
    rd.fail("space.partitions", "expected a nonempty array of partitions");
    return std::nullopt;
  }
  std::vector<Partition> out;
  bool ok = true;
  for (std::size_t t = 0; t < j.size(); ++t) {
    const std::string path = fmt::format("space.partitions[{}]", t);
    if (!j[t].is_array()) {
      rd.fail(path, "expected an array of cells");
      ok = false;
      continue;
    }
    Partition part;
    for (std::size_t c = 0; c < j[t].size(); ++c) {
      const Json& cell = j[t][c];
      if (!cell.is_array()) {
        rd.fail(fmt::format("{}[{}]", path, c), "expected an array of scenario indices");
        ok = false;
        continue;
      }
      std::vector<int> members;
      for (const auto& s : cell) {
        if (!s.is_number_integer()) {
          rd.fail(fmt::format("{}[{}]", path, c), "scenario indices must be integers");
          ok = false;
          break;
        }
        members.push_back(s.get<int>());
      }
      part.push_back(std::move(members));
    }
    out.push_back(std::move(part));
  }
  if (!ok) return std::nullopt;
  return out;
}

}  // namespace

const std::map<std::string, double>& default_tolerances() {
  static const std::map<std::string, double> tol{
      {"conjugacy", 2e-3},     {"dual_relation", 1e-6}, {"derivative", 1e-4}, {"kkt", 1e-7},
      {"stability", 1e-3},     {"uniform", 2e-3},       {"minimax_gap", 5e-2},
  };
  return tol;
}

ParseResult parse_config(const std::string& text) {
  ParseResult res;
  auto& errs = res.errors;
  Reader rd(errs);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    errs.push_back(fmt::format("config: invalid JSON ({})", e.what()));
    return res;
  }
  if (!j.is_object()) {
    errs.push_back("config: top level must be an object");
    return res;
  }
  rd.keys(j, "", {"version", "name", "space", "market", "utility", "tau", "xi", "eta", "etas", "grid_points",
                  "sequence", "nets", "minimax", "checks", "tolerances", "seed", "output"});
  ExperimentConfig cfg;
  if (!j.contains("version")) {
    rd.fail("version", fmt::format("missing; expected \"{}\"", kConfigVersion));
  } else if (auto v = rd.string(j["version"], "version"); v && *v != kConfigVersion) {
    rd.fail("version", fmt::format("unsupported \"{}\"; expected \"{}\"", *v, kConfigVersion));
  }
  if (j.contains("name")) {
    if (auto v = rd.string(j["name"], "name")) cfg.name = *v;
  }
  for (const char* req : {"space", "market", "utility", "tau", "checks"}) {
    if (!j.contains(req)) rd.fail(req, "missing");
  }

  // Space.
  std::optional<FilteredSpace> space;
  if (j.contains("space")) {
    const Json& js = j["space"];
    if (!js.is_object()) {
      rd.fail("space", "expected an object");
    } else {
      rd.keys(js, "space", {"prob", "partitions", "names"});
      std::optional<std::vector<double>> prob;
      std::optional<std::vector<Partition>> parts;
      if (!js.contains("prob")) rd.fail("space.prob", "missing"); else prob = rd.numbers(js["prob"], "space.prob");
      if (!js.contains("partitions")) {
        rd.fail("space.partitions", "missing");
      } else {
        parts = read_partitions(rd, js["partitions"]);
      }
      if (js.contains("names")) {
        if (!js["names"].is_array()) {
          rd.fail("space.names", "expected an array of strings");
        } else {
          for (std::size_t i = 0; i < js["names"].size(); ++i) {
            if (auto s = rd.string(js["names"][i], fmt::format("space.names[{}]", i))) cfg.scenario_names.push_back(*s);
          }
        }
      }
      if (prob && parts) {
        const auto issues = FilteredSpace::diagnose(*prob, *parts);
        for (const auto& i : issues) errs.push_back("space." + i);
        if (!cfg.scenario_names.empty() && cfg.scenario_names.size() != prob->size()) {
          rd.fail("space.names", fmt::format("expected {} names, got {}", prob->size(), cfg.scenario_names.size()));
        } else if (issues.empty()) {
          cfg.prob = *prob;
          cfg.partitions = *parts;
          space.emplace(cfg.prob, cfg.partitions, cfg.scenario_names);
        }
      }
    }
  }

  // Market.
  if (j.contains("market")) {
    const Json& jm = j["market"];
    if (!jm.is_object()) {
      rd.fail("market", "expected an object");
    } else {
      rd.keys(jm, "market", {"dM", "lam"});
      if (!jm.contains("dM")) rd.fail("market.dM", "missing");
      if (!jm.contains("lam")) rd.fail("market.lam", "missing");
      if (space && jm.contains("dM") && jm.contains("lam")) {
        auto dM = jm["dM"].is_number() ? std::nullopt : rd.per_period(jm["dM"], *space, 1, "market.dM");
        if (jm["dM"].is_number()) rd.fail("market.dM", "expected one array per period (per cell of F_t)");
        auto lam = rd.per_period(jm["lam"], *space, 0, "market.lam");
        if (dM && lam) {
          const auto issues = MarketModel::diagnose(*space, *dM, *lam);
          for (const auto& i : issues) errs.push_back("market." + i);
          if (issues.empty()) {
            cfg.dM = *dM;
            cfg.lam = *lam;
          }
        }
      }
    }
  }

  // Utility.
  if (j.contains("utility")) {
    const Json& ju = j["utility"];
    if (!ju.is_object()) {
      rd.fail("utility", "expected an object");
    } else {
      rd.keys(ju, "utility", {"kind", "p", "points", "tail_exponent"});
      bool ok = true;
      if (!ju.contains("kind")) {
        rd.fail("utility.kind", "missing");
        ok = false;
      } else if (auto k = rd.string(ju["kind"], "utility.kind")) {
        cfg.utility.kind = *k;
        if (*k != "log" && *k != "power" && *k != "table") {
          rd.fail("utility.kind", fmt::format("unknown kind \"{}\" (log, power, table)", *k));
          ok = false;
        }
      } else {
        ok = false;
      }
      if (ju.contains("p")) {
        if (auto p = rd.number(ju["p"], "utility.p")) cfg.utility.p = *p; else ok = false;
      }
      if (ju.contains("tail_exponent")) {
        if (auto p = rd.number(ju["tail_exponent"], "utility.tail_exponent")) cfg.utility.tail_exponent = *p; else ok = false;
      }
      if (ju.contains("points")) {
        if (!ju["points"].is_array()) {
          rd.fail("utility.points", "expected an array of [x, U] pairs");
          ok = false;
        } else {
          for (std::size_t i = 0; i < ju["points"].size(); ++i) {
            auto xy = rd.numbers(ju["points"][i], fmt::format("utility.points[{}]", i));
            if (!xy || xy->size() != 2) {
              if (xy) rd.fail(fmt::format("utility.points[{}]", i), "expected [x, U]");
              ok = false;
            } else {
              cfg.utility.points.emplace_back((*xy)[0], (*xy)[1]);
            }
          }
        }
      }
      if (ok && cfg.utility.kind == "table" && !ju.contains("points")) {
        rd.fail("utility.points", "required for a table utility");
        ok = false;
      }
      if (ok) {
        try {
          (void)make_utility(cfg.utility);
        } catch (const Error& e) {
          rd.fail("utility", e.what());
        }
      }
    }
  }

  // Stopping time and the F_tau-indexed inputs.
  std::optional<SigmaAlgebra> ftau;
  if (j.contains("tau") && space) {
    const Json& jt = j["tau"];
    std::vector<int> tau;
    if (jt.is_string()) {
      const std::string s = jt.get<std::string>();
      int t = -1;
      if (s.rfind("t=", 0) == 0) {
        try {
          std::size_t used = 0;
          t = std::stoi(s.substr(2), &used);
          if (used != s.size() - 2) t = -1;
        } catch (const std::exception&) {
          t = -1;
        }
      }
      if (t < 0 || t > space->horizon()) {
        rd.fail("tau", fmt::format("expected \"t=k\" with 0 <= k <= {}, got \"{}\"", space->horizon(), s));
      } else {
        tau.assign(space->size(), t);
      }
    } else if (jt.is_array()) {
      if (jt.size() != space->size()) {
        rd.fail("tau", fmt::format("expected {} entries, got {}", space->size(), jt.size()));
      } else {
        for (std::size_t i = 0; i < jt.size(); ++i) {
          if (auto v = rd.integer(jt[i], fmt::format("tau[{}]", i))) tau.push_back(static_cast<int>(*v));
        }
      }
    } else {
      rd.fail("tau", "expected \"t=k\" or one time per scenario");
    }
    if (tau.size() == space->size()) {
      if (!check_stopping_time(*space, tau)) {
        rd.fail("tau", "not a stopping time of the filtration");
      } else {
        cfg.tau = tau;
        ftau = space->sigma_at(StoppingTime(tau));
      }
    }
  }
  auto atom_rv = [&](const char* key, RandomVariable& dst) {
    if (!ftau) return;
    std::vector<double> vals(ftau->size(), 1.0);
    if (j.contains(key)) {
      auto v = rd.per_atom(j[key], ftau->size(), key);
      if (!v) return;
      vals = *v;
    }
    for (std::size_t a = 0; a < vals.size(); ++a) {
      if (!(vals[a] > 0.0)) rd.fail(key, fmt::format("must be positive (atom {})", a));
    }
    dst = ftau->lift(vals);
  };
  atom_rv("xi", cfg.xi);
  atom_rv("eta", cfg.eta);
  if (j.contains("etas")) {
    if (auto v = rd.numbers(j["etas"], "etas")) {
      cfg.etas = *v;
      if (v->empty()) rd.fail("etas", "must not be empty");
      for (double e : *v) {
        if (!(e > 0.0)) rd.fail("etas", "entries must be positive");
      }
    }
  }
  if (j.contains("grid_points")) {
    if (auto v = rd.integer(j["grid_points"], "grid_points")) {
      if (*v < 2 || *v > 100000) rd.fail("grid_points", "must lie in [2, 100000]");
      cfg.grid_points = static_cast<int>(*v);
    }
  }

  // Checks.
  if (j.contains("checks")) {
    const Json& jc = j["checks"];
    if (!jc.is_array() || jc.empty()) {
      rd.fail("checks", "expected a nonempty array");
    } else {
      for (std::size_t i = 0; i < jc.size(); ++i) {
        auto s = rd.string(jc[i], fmt::format("checks[{}]", i));
        if (!s) continue;
        if (!kChecks.contains(*s)) {
          rd.fail(fmt::format("checks[{}]", i), fmt::format("unknown check \"{}\" (duality, stability, nets, minimax)", *s));
        } else {
          cfg.checks.push_back(*s);
        }
      }
    }
  }
  auto wants = [&](const char* c) { return std::find(cfg.checks.begin(), cfg.checks.end(), c) != cfg.checks.end(); };

  // Sequence.
  if (j.contains("sequence")) {
    const Json& jq = j["sequence"];
    if (!jq.is_object()) {
      rd.fail("sequence", "expected an object");
    } else {
      rd.keys(jq, "sequence", {"delta", "decay", "table", "n_max", "joint_xi", "x0"});
      SequenceSpec seq;
      bool ok = true;
      if (!jq.contains("delta")) {
        rd.fail("sequence.delta", "missing");
        ok = false;
      } else if (space) {
        auto d = rd.per_period(jq["delta"], *space, 0, "sequence.delta");
        if (d) seq.delta = *d; else ok = false;
      }
      if (jq.contains("decay")) {
        if (auto s = rd.string(jq["decay"], "sequence.decay")) {
          seq.decay = *s;
          if (*s != "1/n" && *s != "1/n^2" && *s != "table") {
            rd.fail("sequence.decay", fmt::format("unknown decay \"{}\" (1/n, 1/n^2, table)", *s));
          }
        }
      }
      if (jq.contains("n_max")) {
        if (auto v = rd.integer(jq["n_max"], "sequence.n_max")) {
          if (*v < 1 || *v > 100000) rd.fail("sequence.n_max", "must lie in [1, 100000]");
          seq.n_max = static_cast<int>(*v);
        }
      }
      if (jq.contains("table")) {
        if (auto v = rd.numbers(jq["table"], "sequence.table")) seq.table = *v;
      }
      if (seq.decay == "table" && seq.table.size() < static_cast<std::size_t>(seq.n_max)) {
        rd.fail("sequence.table", fmt::format("needs at least n_max = {} entries", seq.n_max));
      }
      if (jq.contains("joint_xi")) {
        if (auto v = rd.boolean(jq["joint_xi"], "sequence.joint_xi")) seq.joint_xi = *v;
      }
      if (jq.contains("x0")) {
        if (auto v = rd.number(jq["x0"], "sequence.x0")) {
          if (!(*v > 0.0)) rd.fail("sequence.x0", "must be positive");
          seq.x0 = *v;
        }
      }
      if (ok) cfg.sequence = seq;
    }
  } else if (wants("stability")) {
    rd.fail("sequence", "required by the stability check");
  }

  // Nets.
  if (j.contains("nets")) {
    const Json& jn = j["nets"];
    if (!jn.is_object()) {
      rd.fail("nets", "expected an object");
    } else {
      rd.keys(jn, "nets", {"lower", "upper", "r", "samples"});
      NetSpec net;
      bool ok = true;
      for (const char* key : {"lower", "upper"}) {
        const std::string path = std::string("nets.") + key;
        if (!jn.contains(key)) {
          rd.fail(path, "missing");
          ok = false;
        } else if (ftau) {
          auto v = rd.per_atom(jn[key], ftau->size(), path);
          if (!v) {
            ok = false;
          } else {
            (std::string(key) == "lower" ? net.lower : net.upper) = *v;
          }
        }
      }
      if (ok && ftau) {
        for (std::size_t a = 0; a < net.lower.size(); ++a) {
          if (!(net.lower[a] > 0.0)) rd.fail("nets.lower", fmt::format("must be positive (atom {})", a));
          if (net.lower[a] > net.upper[a]) rd.fail("nets", fmt::format("lower exceeds upper on atom {}", a));
        }
      }
      if (jn.contains("r")) {
        if (auto v = rd.number(jn["r"], "nets.r")) {
          if (!(*v > 0.0)) rd.fail("nets.r", "must be positive");
          net.r = *v;
        }
      }
      if (jn.contains("samples")) {
        if (auto v = rd.integer(jn["samples"], "nets.samples")) {
          if (*v < 1 || *v > 10000000) rd.fail("nets.samples", "must lie in [1, 1e7]");
          net.samples = static_cast<std::size_t>(*v);
        }
      }
      if (ok) cfg.nets = net;
    }
  } else if (wants("nets")) {
    rd.fail("nets", "required by the nets check");
  }

  // Minimax grids.
  if (j.contains("minimax")) {
    const Json& jx = j["minimax"];
    if (!jx.is_object()) {
      rd.fail("minimax", "expected an object");
    } else {
      rd.keys(jx, "minimax", {"steps", "truncations"});
      for (const char* key : {"steps", "truncations"}) {
        if (!jx.contains(key)) continue;
        const std::string path = std::string("minimax.") + key;
        if (auto v = rd.numbers(jx[key], path)) {
          if (v->empty()) rd.fail(path, "must not be empty");
          for (double x : *v) {
            if (!(x > 0.0)) rd.fail(path, "entries must be positive");
          }
          (std::string(key) == "steps" ? cfg.minimax.steps : cfg.minimax.truncations) = *v;
        }
      }
    }
  }

  // Tolerances, seed and output.
  if (j.contains("tolerances")) {
    const Json& jt = j["tolerances"];
    if (!jt.is_object()) {
      rd.fail("tolerances", "expected an object");
    } else {
      for (const auto& [k, v] : jt.items()) {
        const std::string path = "tolerances." + k;
        if (!default_tolerances().contains(k)) {
          rd.fail(path, "unknown key");
          continue;
        }
        if (auto x = rd.number(v, path)) {
          if (!(*x > 0.0)) rd.fail(path, "must be positive");
          cfg.tolerances[k] = *x;
        }
      }
    }
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) {
      rd.fail("seed", "expected a nonnegative integer");
    } else {
      cfg.seed = j["seed"].get<std::uint64_t>();
    }
  }
  if (j.contains("output")) {
    const Json& jo = j["output"];
    if (!jo.is_object()) {
      rd.fail("output", "expected an object");
    } else {
      rd.keys(jo, "output", {"dir", "json", "csv"});
      if (jo.contains("dir")) {
        if (auto s = rd.string(jo["dir"], "output.dir")) cfg.out_dir = *s;
      }
      if (jo.contains("json")) {
        if (auto s = rd.string(jo["json"], "output.json")) cfg.json_name = *s;
      }
      if (jo.contains("csv")) {
        if (auto s = rd.string(jo["csv"], "output.csv")) cfg.csv_name = *s;
      }
    }
  }

  if (errs.empty()) res.config = std::move(cfg);
  return res;
}

ParseResult load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    ParseResult res;
    res.errors.push_back(fmt::format("config: cannot read {}", path));
    return res;
  }
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_config(buf.str());
}

namespace {

struct CheckOutcome {
  Json block;
  bool pass = true;
  const StabilityReport* stability = nullptr;
};

Json duality_block(const MarketModel& m, const UtilityPair& u, const StoppingTime& tau, const ExperimentConfig& cfg,
                   const std::map<std::string, double>& tol, const SolveOptions& opts, bool& pass) {
  const DualityResult primal = primal_solve(m, u, tau, cfg.xi, opts);
  const DualityResult dual = dual_solve(m, u, tau, cfg.eta, opts);
  const DualRelationReport rel = dual_relation_check(m, u, tau, cfg.xi, opts);
  const ConjugacyReport conj = conjugacy_check(m, u, tau, cfg.etas, cfg.grid_points, opts);

  Json atoms = Json::array();
  const auto xi = primal.atoms.atom_values(cfg.xi);
  const auto eta = primal.atoms.atom_values(cfg.eta);
  for (std::size_t a = 0; a < primal.atoms.size(); ++a) {
    const Atom& at = primal.atoms.atom(a);
    atoms.push_back(Json{{"atom", a},
                         {"node", at.node},
                         {"time", at.time},
                         {"prob", report::number(at.prob)},
                         {"xi", report::number(xi[a])},
                         {"eta", report::number(eta[a])},
                         {"u", report::number(primal.atom_values_u[a])},
                         {"u_prime", report::number(primal.u_prime[a])},
                         {"v", report::number(dual.atom_values_v[a])},
                         {"v_prime", report::number(dual.v_prime[a])}});
  }

  Json deriv = Json::array();
  double max_gap = 0.0;
  for (double e : cfg.etas) {
    const DerivativeReport d = dual_derivative(m, u, tau, RandomVariable(m.space().size(), e), opts);
    max_gap = std::max(max_gap, d.max_rel_gap);
    deriv.push_back(Json{{"eta", report::number(e)},
                         {"formula", report::numbers(d.formula)},
                         {"finite_difference", report::numbers(d.finite_difference)},
                         {"max_rel_gap", report::number(d.max_rel_gap)},
                         {"diagnostic", d.diagnostic}});
  }

  const double kkt = std::max(primal.kkt_residual, dual.kkt_residual);
  const bool kkt_ok = kkt <= tol.at("kkt");
  const bool rel_ok = rel.max_residual <= tol.at("dual_relation");
  const bool der_ok = max_gap <= tol.at("derivative");
  const bool conj_ok = conj.max_refined_residual <= tol.at("conjugacy");
  pass = kkt_ok && rel_ok && der_ok && conj_ok;
  return Json{{"atoms", atoms},
              {"X_hat", report::numbers(primal.X_hat)},
              {"Y_hat", report::numbers(dual.Y_hat)},
              {"kkt", Json{{"primal", report::number(primal.kkt_residual)},
                           {"dual", report::number(dual.kkt_residual)},
                           {"tolerance", report::number(tol.at("kkt"))},
                           {"pass", kkt_ok}}},
              {"dual_relation", Json{{"max_residual", report::number(rel.max_residual)},
                                     {"residual", report::numbers(rel.residual)},
                                     {"tolerance", report::number(tol.at("dual_relation"))},
                                     {"pass", rel_ok}}},
              {"derivative", Json{{"max_rel_gap", report::number(max_gap)},
                                  {"tolerance", report::number(tol.at("derivative"))},
                                  {"pass", der_ok},
                                  {"entries", deriv}}},
              {"conjugacy", report::to_json(conj, tol.at("conjugacy"))},
              {"pass", pass}};
}

MarketSequence make_sequence(const MarketModel& m, const SequenceSpec& s) {
  const DecayKind decay = s.decay == "1/n"   ? DecayKind::kInverse
                          : s.decay == "1/n^2" ? DecayKind::kInverseSquare
                                               : DecayKind::kTable;
  return MarketSequence(m, s.delta, decay, s.n_max, s.table);
}

ConvexCompactSet make_set(const FilteredSpace& sp, const SigmaAlgebra& g, const NetSpec& n) {
  return ConvexCompactSet::order_interval(sp, g, g.lift(n.lower), g.lift(n.upper));
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  RunOutcome out;
  const std::string dir = options.out_dir.value_or(cfg.out_dir);
  out.json_path = (std::filesystem::path(dir) / cfg.json_name).string();
  out.csv_path = (std::filesystem::path(dir) / cfg.csv_name).string();
  if (!(options.tol_scale > 0.0) || options.jobs < 1) {
    out.exit_code = 2;
    out.messages.push_back("cli: --tol-scale must be positive and --jobs at least 1");
    return out;
  }
  const std::uint64_t seed = options.seed.value_or(cfg.seed);
  std::map<std::string, double> tol = default_tolerances();
  for (const auto& [k, v] : cfg.tolerances) tol[k] = v;
  for (auto& [k, v] : tol) v *= options.tol_scale;

  Json doc;
  doc["version"] = kConfigVersion;
  doc["name"] = cfg.name;
  doc["seed"] = seed;
  doc["tol_scale"] = report::number(options.tol_scale);
  Json tj = Json::object();
  for (const auto& [k, v] : tol) tj[k] = report::number(v);
  doc["tolerances"] = tj;
  Json checks = Json::object();
  std::optional<StabilityReport> stab;
  bool all_pass = true;

  try {
    const FilteredSpace sp(cfg.prob, cfg.partitions, cfg.scenario_names);
    const MarketModel m = MarketModel::build(sp, cfg.dM, cfg.lam);
    const bool nflvr = check_nflvr(m);
    doc["nflvr"] = nflvr;
    if (!nflvr) throw ModelError("market_model", "NFLVR check failed");
    const UtilityPair u = make_utility(cfg.utility);
    doc["utility"] = u.name();
    const StoppingTime tau(cfg.tau);
    const SigmaAlgebra ftau = sp.sigma_at(tau);
    const WorkerPool pool(options.jobs);
    SolveOptions opts;
    opts.pool = &pool;

    for (const auto& check : cfg.checks) {
      Json block;
      bool pass = true;
      if (check == "duality") {
        block = duality_block(m, u, tau, cfg, tol, opts, pass);
      } else if (check == "stability") {
        const MarketSequence seq = make_sequence(m, *cfg.sequence);
        const VCompactnessReport vc = v_compactness_check(seq, u);
        const ConvergenceReport ac = appropriate_convergence_check(seq);
        block["v_compactness"] = report::to_json(vc);
        block["appropriate_convergence"] = report::to_json(ac);
        pass = vc.pass && ac.pass;
        if (pass) {
          StabilityOptions so;
          so.x0 = cfg.sequence->x0;
          so.joint_xi = cfg.sequence->joint_xi;
          so.tolerance = tol.at("stability");
          so.solve = opts;
          stab = run_stability_experiment(seq, u, tau, cfg.xi, cfg.eta, so);
          block["experiment"] = report::to_json(*stab);
          pass = stab->pass;
          if (cfg.nets) {
            const UniformConvergenceReport uc =
                uniform_convergence_on_set(seq, u, tau, make_set(sp, ftau, *cfg.nets), cfg.nets->r, tol.at("uniform"), opts);
            block["uniform"] = report::to_json(uc);
            pass = pass && uc.pass;
          }
        } else {
          block["experiment"] = "skipped: preconditions failed";
        }
        block["pass"] = pass;
      } else if (check == "nets") {
        const ConvexCompactSet k = make_set(sp, ftau, *cfg.nets);
        const auto net_c = ftau_convex_net(k, cfg.nets->r);
        const auto net_s = partition_subconvex_net(k, cfg.nets->r);
        const CoverCertificate cc = net_cover_certificate(k, net_c, cfg.nets->r, HullKind::kConvex, cfg.nets->samples, seed);
        const CoverCertificate cs =
            net_cover_certificate(k, net_s, cfg.nets->r, HullKind::kPartitionSub, cfg.nets->samples, seed);
        auto cert = [&](const CoverCertificate& c, std::size_t size) {
          return Json{{"net_size", size},
                      {"samples", c.samples},
                      {"violations", c.violations},
                      {"max_distance", report::number(c.max_distance)},
                      {"radius", report::number(cfg.nets->r)},
                      {"seed", c.seed},
                      {"pass", c.violations == 0}};
        };
        block["diameter"] = report::number(k.diameter());
        block["convex"] = cert(cc, net_c.size());
        block["partition_subconvex"] = cert(cs, net_s.size());
        pass = cc.violations == 0 && cs.violations == 0;
        block["pass"] = pass;
      } else if (check == "minimax") {
        const MinimaxReport mr = reconcile_minimax(m, u, tau, cfg.eta, cfg.minimax.steps, cfg.minimax.truncations, opts);
        block = report::to_json(mr, tol.at("minimax_gap"));
        bool gaps_ok = true;
        for (const auto& a : mr.atoms) {
          for (const auto& c : a.cells) gaps_ok = gaps_ok && c.result.gap <= tol.at("minimax_gap");
        }
        pass = mr.pass && gaps_ok;
        block["pass"] = pass;
      }
      checks[check] = block;
      if (!pass) out.messages.push_back(fmt::format("{}: check failed", check));
      all_pass = all_pass && pass;
    }
    out.exit_code = all_pass ? 0 : 1;
  } catch (const Error& e) {
    out.exit_code = 3;
    out.messages.push_back(e.what());
    doc["error"] = e.what();
  }
  doc["checks"] = checks;
  doc["pass"] = out.exit_code == 0;
  doc["exit_code"] = out.exit_code;
  out.json = report::dump(doc);
  out.csv = report::stability_csv(stab ? &*stab : nullptr);
  try {
    std::filesystem::create_directories(dir);
    report::write_file(out.json_path, out.json);
    report::write_file(out.csv_path, out.csv);
  } catch (const std::exception& e) {
    out.messages.push_back(fmt::format("cli: {}", e.what()));
    if (out.exit_code == 0) out.exit_code = 3;
  }
  return out;
}

}  // namespace dlab
