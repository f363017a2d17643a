// qlab: command-line face of the quasi-locality verification laboratory.
//
// Subcommands:
//   run               execute one audit pipeline from a config file
//   sweep             run a pipeline over a list of values of one axis
//   catalog           list model presets with parameter schemas
//   weights-table     emit the (t, w_gamma, W_gamma) CSV
//   flow-verify       projector-transport audit (pipeline=flow)
//   gap-audit         ground-cluster gap audit (pipeline=gap)
//   automorphic-audit automorphic-equivalence audit (pipeline=equivalence)
//
// Command-line flags mirror config keys and override the file.
// Environment: QLOC_CACHE_DIR caches the weight-function master tables.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qlv/harness.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string pipeline;
  std::string out_dir;
  int parallelism = 0;  // 0 -> keep config value
  double gamma = 0.0;
  double ode_step = 0.0;
  double gap_window = 0.0;
  std::string preset;
  std::vector<int> lengths;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool pipeline_fixed) {
  cmd->add_option("--config", f.config_path, "Scenario config file");
  if (!pipeline_fixed) {
    cmd->add_option("--pipeline", f.pipeline,
                    "lr | difference | localization | transform | weights | "
                    "flow | gap | equivalence | appendix");
  }
  cmd->add_option("--out", f.out_dir, "Output directory for CSV + manifest");
  cmd->add_option("--parallelism", f.parallelism, "1 or 8");
  cmd->add_option("--gamma", f.gamma, "Weight scale gamma");
  cmd->add_option("--ode-step", f.ode_step, "Flow rk4 step");
  cmd->add_option("--gap-window", f.gap_window, "Ground-cluster window");
  cmd->add_option("--preset", f.preset, "Model preset (see `qlab catalog`)");
  cmd->add_option("--lengths", f.lengths, "Lattice extents");
}

qlv::ScenarioConfig load_config(const CommonFlags& f,
                                const std::string& fixed_pipeline) {
  qlv::ScenarioConfig cfg;
  if (!f.config_path.empty()) cfg = qlv::parse_config_file(f.config_path);
  // Flags override the file.
  if (!fixed_pipeline.empty()) cfg.pipeline = fixed_pipeline;
  if (!f.pipeline.empty()) cfg.pipeline = f.pipeline;
  if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
  if (f.parallelism != 0) cfg.parallelism = f.parallelism;
  if (f.gamma != 0.0) cfg.gamma = f.gamma;
  if (f.ode_step != 0.0) cfg.ode_step = f.ode_step;
  if (f.gap_window != 0.0) cfg.gap_window = f.gap_window;
  if (!f.preset.empty()) cfg.preset = f.preset;
  if (!f.lengths.empty()) {
    cfg.lengths = f.lengths;
    cfg.nu = static_cast<int>(f.lengths.size());
  }
  cfg.validate();
  return cfg;
}

int report_outcome(const qlv::RunReport& rep) {
  for (const qlv::ReportRow& r : rep.rows) {
    std::printf("%-60s lhs=%-13.6g rhs=%-13.6g %s\n", r.what.c_str(), r.lhs,
                r.rhs, r.pass ? "pass" : "FAIL");
  }
  std::printf("pipeline %s: %s (%.2fs, config %s)\n", rep.pipeline.c_str(),
              rep.pass ? "pass" : "FAIL", rep.wall_seconds, rep.hash.c_str());
  return rep.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "qlab: quasi-locality verification laboratory\n"
      "CSV columns per pipeline:\n"
      "  checks (all):   what,lhs,rhs,tolerance,pass,slack\n"
      "  weights:        t,w_gamma,W_gamma\n"
      "  lr:             t,exact,bound\n"
      "  flow:           s,residual\n"
      "  gap:            s,gap,cluster_width,cluster_size,gapped\n"
      "  equivalence:    k,l,residual\n"
      "  sweep:          axis_value,what,lhs,rhs,tolerance,pass\n"};
  app.require_subcommand(1);

  CommonFlags rf;
  CLI::App* cmd_run = app.add_subcommand("run", "Run one audit pipeline");
  add_common(cmd_run, rf, false);

  CommonFlags sf;
  std::string sweep_axis = "gamma";
  std::vector<double> sweep_values;
  bool fail_fast = false;
  CLI::App* cmd_sweep =
      app.add_subcommand("sweep", "Run a pipeline over one numeric axis");
  add_common(cmd_sweep, sf, false);
  cmd_sweep->add_option("--axis", sweep_axis, "Config field to sweep");
  cmd_sweep->add_option("--values", sweep_values, "Axis values")->required();
  cmd_sweep->add_flag("--fail-fast", fail_fast, "Stop at the first failure");

  CLI::App* cmd_catalog =
      app.add_subcommand("catalog", "List model presets and schemas");

  double wt_gamma = 1.0, wt_tmax = 40.0;
  int wt_nodes = 401;
  std::string wt_out;
  CLI::App* cmd_wt = app.add_subcommand(
      "weights-table", "Emit the (t, w_gamma, W_gamma) CSV table");
  cmd_wt->add_option("--gamma", wt_gamma, "Weight scale");
  cmd_wt->add_option("--t-max", wt_tmax, "Last abscissa");
  cmd_wt->add_option("--nodes", wt_nodes, "Number of grid nodes");
  cmd_wt->add_option("--out", wt_out, "Write to this file instead of stdout");

  CommonFlags ff, gf, ef;
  CLI::App* cmd_flow =
      app.add_subcommand("flow-verify", "Projector-transport audit");
  add_common(cmd_flow, ff, true);
  CLI::App* cmd_gap = app.add_subcommand("gap-audit", "Gapped-curve audit");
  add_common(cmd_gap, gf, true);
  CLI::App* cmd_auto = app.add_subcommand("automorphic-audit",
                                          "Automorphic-equivalence audit");
  add_common(cmd_auto, ef, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_catalog->parsed()) {
      std::cout << qlv::catalog_text();
      return 0;
    }
    if (cmd_wt->parsed()) {
      const std::string csv =
          qlv::weights_table_csv(wt_gamma, wt_tmax, wt_nodes);
      if (wt_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream out(wt_out, std::ios::binary);
        out << csv;
      }
      return 0;
    }
    if (cmd_sweep->parsed()) {
      qlv::ScenarioConfig cfg = load_config(sf, "");
      const qlv::SweepResult res =
          qlv::sweep(cfg, sweep_axis, sweep_values, cfg.parallelism, fail_fast);
      std::filesystem::create_directories(cfg.out_dir);
      const auto path = std::filesystem::path(cfg.out_dir) /
                        (cfg.name + "-sweep-" + sweep_axis + ".csv");
      std::ofstream out(path, std::ios::binary);
      out << res.aggregate_csv();
      for (std::size_t i = 0; i < res.values.size(); ++i) {
        std::printf("%s = %g: %s\n", sweep_axis.c_str(), res.values[i],
                    res.reports[i].pass ? "pass" : "FAIL");
      }
      std::printf("sweep: %s\n", res.pass ? "pass" : "FAIL");
      return res.pass ? 0 : 1;
    }
    const CommonFlags* flags = &rf;
    std::string fixed;
    if (cmd_flow->parsed()) {
      flags = &ff;
      fixed = "flow";
    } else if (cmd_gap->parsed()) {
      flags = &gf;
      fixed = "gap";
    } else if (cmd_auto->parsed()) {
      flags = &ef;
      fixed = "equivalence";
    }
    const qlv::ScenarioConfig cfg = load_config(*flags, fixed);
    return report_outcome(qlv::run_and_write(cfg));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
