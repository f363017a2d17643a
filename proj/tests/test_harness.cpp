#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "qlv/harness.hpp"

using namespace qlv;

namespace {

const char* kLrConfig = R"(
# Lieb-Robinson audit on a short chain.
[scenario]
name = lr_demo
pipeline = lr
[lattice]
nu = 1
lengths = 6
[model]
preset = tfi_chain
J = 1.0
h0 = 1.0
h1 = 1.0
[decay]
f_power = 2.0
weight_kind = power
weight_a = 1.0
weight_theta = 1.0
[grids]
t_grid = 0.0, 0.25, 0.5, 0.75, 1.0
s_grid = 0.0, 1.0
)";

}  // namespace

TEST_CASE("config parsing: sections, lists, comments, diagnostics") {
  const ScenarioConfig cfg = parse_config_text(kLrConfig);
  CHECK(cfg.name == "lr_demo");
  CHECK(cfg.pipeline == "lr");
  CHECK(cfg.lengths == std::vector<int>{6});
  CHECK(cfg.t_grid.size() == 5);
  CHECK(cfg.t_grid[1] == 0.25);

  // Unknown key, malformed line, and bad values carry line numbers.
  CHECK_THROWS_WITH_AS(parse_config_text("[scenario]\nbogus = 1\n"),
                       doctest::Contains("line 2"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("[grids]\nt_grid = 1, two\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("no equals sign"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("[unterminated\n"), std::invalid_argument);

  // Validation: negative tolerance, unknown pipeline / preset, bad lattice.
  CHECK_THROWS_AS(
      parse_config_text("[tolerances]\ntol_audit = -1\n"),
      std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("[scenario]\npipeline = nonsense\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("[model]\npreset = nonsense\n"),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      parse_config_text("[lattice]\nnu = 2\nlengths = 5\n"),
      std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("[output]\nparallelism = 3\n"),
                  std::invalid_argument);
}

TEST_CASE("config hash: stable, sensitive to every serialized field") {
  const ScenarioConfig a = parse_config_text(kLrConfig);
  ScenarioConfig b = a;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.gamma = 2.0;
  CHECK(config_hash(a) != config_hash(b));
  ScenarioConfig c = a;
  c.seed += 1;
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("weights pipeline: CSV table and pass manifest") {
  ScenarioConfig cfg;
  cfg.pipeline = "weights";
  cfg.gamma = 1.0;
  const RunReport rep = run(cfg);
  CHECK(rep.pass);
  REQUIRE(rep.tables.count("weights") == 1);
  const std::string& csv = rep.tables.at("weights");
  CHECK(csv.rfind("t,w_gamma,W_gamma\n", 0) == 0);
  // header + 401 data rows
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 402);
  // Manifest carries the rows with both sides of every inequality.
  const std::string mj = rep.manifest_json(cfg);
  CHECK(mj.find("config_hash") != std::string::npos);
  CHECK(mj.find("\"lhs\"") != std::string::npos);
  CHECK(mj.find("\"rhs\"") != std::string::npos);

  // The standalone weights table matches the same evaluators.
  const std::string wt = weights_table_csv(1.0, 40.0, 401);
  CHECK(wt == csv);
}

TEST_CASE("lr pipeline: every sampled commutator below its bound") {
  const ScenarioConfig cfg = parse_config_text(kLrConfig);
  const RunReport rep = run(cfg);
  CHECK(rep.pass);
  CHECK(rep.rows.size() == cfg.t_grid.size());
  for (const ReportRow& r : rep.rows) {
    CHECK(r.lhs <= r.rhs + r.tolerance);
    CHECK(r.tolerance > 0.0);
  }
  CHECK(rep.tables.count("lr") == 1);
  CHECK(rep.tables.count("checks") == 1);
}

TEST_CASE("localization and difference pipelines pass on small chains") {
  ScenarioConfig cfg;
  cfg.pipeline = "localization";
  cfg.lengths = {4};
  const RunReport loc = run(cfg);
  CHECK(loc.pass);
  CHECK(loc.rows.size() == 7);

  ScenarioConfig dc = parse_config_text(kLrConfig);
  dc.pipeline = "difference";
  dc.t_grid = {0.5};
  const RunReport diff = run(dc);
  CHECK(diff.pass);
  CHECK(diff.rows.size() == 2);
  for (const ReportRow& r : diff.rows) CHECK(r.slack >= 1.0);
}

TEST_CASE("gap pipeline: degenerate classical ground cluster reported") {
  ScenarioConfig cfg;
  cfg.pipeline = "gap";
  cfg.preset = "classical_ising_chain";
  cfg.lengths = {5};
  cfg.s_grid = {0.0};
  cfg.gap_window = 1.0;
  const RunReport rep = run(cfg);
  CHECK(rep.pass);
  const std::string& csv = rep.tables.at("gap");
  CHECK(csv.rfind("s,gap,cluster_width,cluster_size,gapped\n", 0) == 0);
  CHECK(csv.find(",2,") != std::string::npos);  // gap 2J with J = 1
}

TEST_CASE("run is deterministic: byte-identical tables across repeats") {
  ScenarioConfig cfg = parse_config_text(kLrConfig);
  const RunReport a = run(cfg);
  const RunReport b = run(cfg);
  CHECK(a.tables == b.tables);
  ScenarioConfig wc;
  wc.pipeline = "weights";
  CHECK(run(wc).tables == run(wc).tables);
}

TEST_CASE("sweep: order-independent aggregation, parallelism invariance") {
  ScenarioConfig cfg;
  cfg.pipeline = "weights";
  cfg.name = "wsweep";
  const std::vector<double> gammas = {0.5, 1.0, 2.0};

  const SweepResult s1 = sweep(cfg, "gamma", gammas, 1);
  const SweepResult s8 = sweep(cfg, "gamma", gammas, 8);
  CHECK(s1.pass);
  CHECK(s8.pass);
  CHECK(s1.aggregate_csv() == s8.aggregate_csv());
  REQUIRE(s1.reports.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(s1.reports[i].tables == s8.reports[i].tables);
  }

  // Single-value sweep reproduces run() up to the derived instance seed.
  const SweepResult s_one = sweep(cfg, "gamma", {1.0}, 1);
  ScenarioConfig one = cfg;
  set_axis(one, "gamma", 1.0);
  std::uint64_t bits;
  const double v = 1.0;
  std::memcpy(&bits, &v, sizeof(bits));
  one.seed = split_seed(cfg.seed, bits);
  one.name = cfg.name + "-gamma-" + format_double(1.0);
  CHECK(s_one.reports[0].tables == run(one).tables);

  CHECK_THROWS_AS(sweep(cfg, "not_an_axis", {1.0}, 1), std::invalid_argument);
  CHECK_THROWS_AS(sweep(cfg, "gamma", {}, 1), std::invalid_argument);
  CHECK_THROWS_AS(sweep(cfg, "gamma", {1.0}, 3), std::invalid_argument);
}

TEST_CASE("catalog lists the model presets with parameter schemas") {
  const std::string text = catalog_text();
  CHECK(text.find("tfi_chain") != std::string::npos);
  CHECK(text.find("classical_ising_chain") != std::string::npos);
  CHECK(text.find("random_local") != std::string::npos);
  CHECK(text.find("seed") != std::string::npos);
  for (const CatalogEntry& e : catalog()) {
    CHECK_FALSE(e.parameters.empty());
    CHECK_FALSE(e.recommended.empty());
  }
}

TEST_CASE("format_double round-trips exactly") {
  for (double x : {0.0, 0.5, 1.0 / 3.0, 1e-300, -2.75, 6.02e23}) {
    CHECK(std::stod(format_double(x)) == x);
  }
}
