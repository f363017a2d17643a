#pragma once

// ============================================================================
// harness: scenario catalog, configuration parsing/validation, audit-pipeline
// orchestration with deterministic parallel sweeps, and persistent CSV +
// JSON-manifest reporting.  This is the CLI face of the laboratory: every
// inequality asserted by a pipeline is written out with both sides and the
// tolerance so reports are re-checkable offline from the CSV alone.
// ============================================================================

#include "qlv/spectralflow.hpp"

#include <map>
#include <string>
#include <vector>

namespace qlv {

// ============================================================================
// ScenarioConfig: a single structured text file, nested [section] headers and
// key = value lines.  '#' starts a comment.  Lists are comma-separated.
// ============================================================================

struct ScenarioConfig {
  // [scenario]
  std::string name = "default";
  std::string pipeline = "weights";  // lr | difference | localization |
                                     // transform | weights | flow | gap |
                                     // equivalence | appendix
  // [lattice]
  int nu = 1;
  std::vector<int> lengths = {8};

  // [model]
  std::string preset = "tfi_chain";  // tfi_chain | xy_chain |
                                     // classical_ising_chain | random_local
  double J = 1.0;
  double h0 = 2.0, h1 = 2.0;  // field schedule h(s) = h0 + (h1 - h0) s
  double range = 1.0;         // random_local interaction range
  double strength = 1.0;      // random_local term magnitude
  unsigned long long seed = 20240901ULL;

  // [decay]  base F(r) = (1+r)^{-p}, optional weight e^{-g(r)}
  double f_power = 2.0;
  std::string weight_kind = "power";  // none | power | log
  double weight_a = 1.0;
  double weight_theta = 1.0;

  // [grids]
  std::vector<double> t_grid = {0.0, 0.5, 1.0};
  std::vector<double> s_grid = {0.0, 0.5, 1.0};
  std::vector<double> x_grid;  // weights pipeline abscissae (empty -> default)

  // [weights]
  double gamma = 1.0;

  // [tolerances]  (all strictly positive)
  double tol_audit = 1e-6;
  double tol_reconstruction = 1e-10;
  double tol_unitarity = 1e-8;
  double tol_transport = 0.05;  // flow / equivalence residual budget

  // [cutoffs]
  double cutoff_T = -1.0;    // weighted-integral horizon (-1 -> default)
  double quad_step = -1.0;   // Filon step (-1 -> default)
  double ode_step = 0.05;    // flow rk4 step
  double gap_window = 1.0;   // ground-cluster window

  // [output]
  std::string out_dir = "qlab-out";
  int parallelism = 1;  // 1 or 8

  void validate() const;  // throws std::invalid_argument with diagnostics
};

// Parse from text / file.  Unknown keys, malformed lines, or failed
// validation throw std::invalid_argument naming the line number.
ScenarioConfig parse_config_text(const std::string& text);
ScenarioConfig parse_config_file(const std::string& path);

// Canonical serialization (stable key order; used for hashing and manifests).
std::string serialize_config(const ScenarioConfig& cfg);

// FNV-1a 64-bit over the canonical serialization, as fixed-width hex.
std::string config_hash(const ScenarioConfig& cfg);

// ============================================================================
// RunReport
// ============================================================================

struct ReportRow {
  std::string what;
  double lhs = 0.0, rhs = 0.0, tolerance = 0.0;
  bool pass = false;
  double slack = 0.0;  // rhs / max(lhs, eps)
};

struct RunReport {
  std::string pipeline;
  std::string hash;  // config hash
  std::vector<ReportRow> rows;
  // name -> full CSV bytes (header line + data rows, '\n' separated)
  std::map<std::string, std::string> tables;
  double wall_seconds = 0.0;
  bool pass = false;  // all rows pass

  std::string manifest_json(const ScenarioConfig& cfg) const;
};

// Execute the configured pipeline.  Throws on configuration errors; audit
// failures are recorded in the report (pass = false), not thrown.
RunReport run(const ScenarioConfig& cfg);

// run() + write <out_dir>/<name>-<table>.csv and <out_dir>/<name>-manifest.json.
RunReport run_and_write(const ScenarioConfig& cfg);

// ============================================================================
// Sweeps: independent instances over one numeric axis, deterministic seeds
// split per (instance, purpose), merged in axis order regardless of the
// number of worker threads.  Byte-identical output for parallelism 1 vs 8.
// ============================================================================

struct SweepResult {
  std::string axis;
  std::vector<double> values;
  std::vector<RunReport> reports;  // in axis order
  bool pass = false;

  // One aggregated CSV: axis value, row name, lhs, rhs, tolerance, pass.
  std::string aggregate_csv() const;
};

SweepResult sweep(const ScenarioConfig& base, const std::string& axis,
                  const std::vector<double>& values, int parallelism,
                  bool fail_fast = false);

// Set one numeric axis field by name ("gamma", "J", "h0", "h1", "f_power",
// "ode_step", ...); throws std::invalid_argument for unknown axes.
void set_axis(ScenarioConfig& cfg, const std::string& axis, double value);

// ============================================================================
// Catalog and the weights table
// ============================================================================

struct CatalogEntry {
  std::string preset;
  std::string parameters;   // schema, e.g. "N, J, h0, h1"
  std::string recommended;  // desk-scale sizes
  std::string note;
};

std::vector<CatalogEntry> catalog();
std::string catalog_text();

// CSV with columns t, w_gamma, W_gamma over a uniform t grid.
std::string weights_table_csv(double gamma, double t_max, int nodes);

// Deterministic float formatting used by every CSV writer (shortest
// round-trippable decimal).
std::string format_double(double x);

}  // namespace qlv
