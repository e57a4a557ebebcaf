#include "duality_lab/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

namespace dlab {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

const std::string kConfigDir = DUALITY_LAB_CONFIG_DIR;

ExperimentConfig load(const std::string& name) {
  ParseResult r = load_config(kConfigDir + "/" + name);
  EXPECT_TRUE(r.errors.empty()) << (r.errors.empty() ? "" : r.errors.front());
  return *r.config;
}

std::string scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("duality_lab_experiment_test_" + name);
  fs::remove_all(p);
  return p.string();
}

bool mentions(const std::vector<std::string>& errors, const std::string& needle) {
  for (const auto& e : errors) {
    if (e.find(needle) != std::string::npos) return true;
  }
  return false;
}

TEST(ParseConfigTest, ReportsEveryViolation) {
  const ParseResult r = load_config(kConfigDir + "/invalid/many_errors.json");
  EXPECT_FALSE(r.config.has_value());
  EXPECT_GE(r.errors.size(), 5u);
  EXPECT_TRUE(mentions(r.errors, "colour: unknown key"));
  EXPECT_TRUE(mentions(r.errors, "version"));
  EXPECT_TRUE(mentions(r.errors, "utility.kind"));
  EXPECT_TRUE(mentions(r.errors, "t=3"));
  EXPECT_TRUE(mentions(r.errors, "plots"));
}

TEST(ParseConfigTest, SpaceAndMarketErrorsArePrefixed) {
  EXPECT_TRUE(mentions(load_config(kConfigDir + "/invalid/bad_prob.json").errors, "space.prob"));
  EXPECT_TRUE(mentions(load_config(kConfigDir + "/invalid/non_refining.json").errors, "does not refine"));
}

TEST(ParseConfigTest, MalformedJsonAndMissingFile) {
  EXPECT_FALSE(parse_config("{ not json").errors.empty());
  EXPECT_FALSE(parse_config("[]").errors.empty());
  EXPECT_FALSE(load_config(kConfigDir + "/nope.json").errors.empty());
}

TEST(ParseConfigTest, ExpandsScalarsAndDefaults) {
  const ExperimentConfig c = load("fix_a.json");
  EXPECT_EQ(c.name, "fix-a");
  ASSERT_EQ(c.lam.size(), 1u);
  EXPECT_EQ(c.lam[0].size(), 2u);
  EXPECT_EQ(c.tau, (std::vector<int>{0, 0}));
  EXPECT_EQ(c.grid_points, 32);
  EXPECT_EQ(c.etas, (std::vector<double>{0.5, 1.0, 2.0}));
  EXPECT_TRUE(c.tolerances.empty());  // overrides only
  EXPECT_EQ(default_tolerances().at("kkt"), 1e-7);
}

TEST(ParseConfigTest, StabilityRequiresSequence) {
  const std::string text = R"({
    "version": "duality-lab/1",
    "space": {"prob": [0.5, 0.5], "partitions": [[[0, 1]], [[0], [1]]]},
    "market": {"dM": [[0.1, -0.1]], "lam": 1.0},
    "utility": {"kind": "log"},
    "tau": "t=0",
    "checks": ["stability"],
    "tolerances": {"bogus": 1.0}
  })";
  const ParseResult r = parse_config(text);
  EXPECT_TRUE(mentions(r.errors, "sequence"));
  EXPECT_TRUE(mentions(r.errors, "bogus"));
}

TEST(RunExperimentTest, FixAValues) {
  RunOptions opts;
  opts.out_dir = scratch("fix_a");
  const RunOutcome out = run_experiment(load("fix_a.json"), opts);
  EXPECT_EQ(out.exit_code, 0);
  EXPECT_TRUE(fs::exists(out.json_path));
  EXPECT_TRUE(fs::exists(out.csv_path));
  const Json j = Json::parse(out.json);
  const Json& atom = j["checks"]["duality"]["atoms"][0];
  EXPECT_NEAR(atom["u"].get<double>(), 0.0, 1e-9);
  EXPECT_NEAR(atom["v"].get<double>(), -1.0, 1e-9);
  EXPECT_TRUE(j["pass"].get<bool>());
}

TEST(RunExperimentTest, ArbitrageIsAModelFailure) {
  RunOptions opts;
  opts.out_dir = scratch("arbitrage");
  const RunOutcome out = run_experiment(load("arbitrage.json"), opts);
  EXPECT_EQ(out.exit_code, 3);
  EXPECT_TRUE(mentions(out.messages, "NFLVR check failed"));
}

TEST(RunExperimentTest, TightTolerancesFail) {
  RunOptions opts;
  opts.out_dir = scratch("tight");
  opts.tol_scale = 1e-9;
  EXPECT_EQ(run_experiment(load("fix_b.json"), opts).exit_code, 1);
}

TEST(RunExperimentTest, BadOptions) {
  RunOptions opts;
  opts.out_dir = scratch("bad");
  opts.jobs = 0;
  EXPECT_EQ(run_experiment(load("fix_a.json"), opts).exit_code, 2);
  opts.jobs = 1;
  opts.tol_scale = -1.0;
  EXPECT_EQ(run_experiment(load("fix_a.json"), opts).exit_code, 2);
}

TEST(RunExperimentTest, StabilityCsvHasOneRowPerMember) {
  RunOptions opts;
  opts.out_dir = scratch("stability");
  const RunOutcome out = run_experiment(load("stability.json"), opts);
  EXPECT_EQ(out.exit_code, 0);
  const auto lines = std::count(out.csv.begin(), out.csv.end(), '\n');
  EXPECT_EQ(lines, 65);
  EXPECT_EQ(out.csv.rfind("n,dZ,dXT,dXtau,du,dv,dvprime,ducp,tolerance", 0), 0u);
}

TEST(RunExperimentTest, ReportsIndependentOfWorkerCount) {
  const ExperimentConfig cfg = load("two_period.json");
  RunOptions a;
  a.out_dir = scratch("jobs1");
  RunOptions b = a;
  b.out_dir = scratch("jobs8");
  b.jobs = 8;
  const RunOutcome ra = run_experiment(cfg, a);
  const RunOutcome rb = run_experiment(cfg, b);
  EXPECT_EQ(ra.json, rb.json);
  EXPECT_EQ(ra.csv, rb.csv);
}

}  // namespace
}  // namespace dlab
