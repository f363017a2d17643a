#include "qlv/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace qlv {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void config_error(int line, const std::string& msg) {
  throw std::invalid_argument("config line " + std::to_string(line) + ": " +
                              msg);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cur = trim(cur);
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double parse_num(const std::string& v, int line) {
  std::size_t pos = 0;
  double x = 0.0;
  bool ok = true;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    ok = false;
  }
  if (!ok || pos != v.size()) {
    config_error(line, "expected a number, got '" + v + "'");
  }
  return x;
}

std::vector<double> parse_num_list(const std::string& v, int line) {
  std::vector<double> out;
  for (const std::string& item : split_list(v)) out.push_back(parse_num(item, line));
  return out;
}

std::vector<int> parse_int_list(const std::string& v, int line) {
  std::vector<int> out;
  for (double x : parse_num_list(v, line)) {
    if (x != std::floor(x)) config_error(line, "expected integers");
    out.push_back(static_cast<int>(x));
  }
  return out;
}

struct KeySetter {
  std::function<void(ScenarioConfig&, const std::string&, int)> set;
};

const std::map<std::string, KeySetter>& key_table() {
  static const std::map<std::string, KeySetter> table = [] {
    std::map<std::string, KeySetter> t;
    auto str = [](std::string ScenarioConfig::*f) {
      return KeySetter{[f](ScenarioConfig& c, const std::string& v, int) {
        c.*f = v;
      }};
    };
    auto num = [](double ScenarioConfig::*f) {
      return KeySetter{[f](ScenarioConfig& c, const std::string& v, int line) {
        c.*f = parse_num(v, line);
      }};
    };
    auto numlist = [](std::vector<double> ScenarioConfig::*f) {
      return KeySetter{[f](ScenarioConfig& c, const std::string& v, int line) {
        c.*f = parse_num_list(v, line);
      }};
    };
    t["scenario.name"] = str(&ScenarioConfig::name);
    t["scenario.pipeline"] = str(&ScenarioConfig::pipeline);
    t["lattice.nu"] = KeySetter{[](ScenarioConfig& c, const std::string& v,
                                   int line) {
      c.nu = static_cast<int>(parse_num(v, line));
    }};
    t["lattice.lengths"] = KeySetter{[](ScenarioConfig& c,
                                        const std::string& v, int line) {
      c.lengths = parse_int_list(v, line);
    }};
    t["model.preset"] = str(&ScenarioConfig::preset);
    t["model.J"] = num(&ScenarioConfig::J);
    t["model.h0"] = num(&ScenarioConfig::h0);
    t["model.h1"] = num(&ScenarioConfig::h1);
    t["model.range"] = num(&ScenarioConfig::range);
    t["model.strength"] = num(&ScenarioConfig::strength);
    t["model.seed"] = KeySetter{[](ScenarioConfig& c, const std::string& v,
                                   int line) {
      try {
        c.seed = std::stoull(v);
      } catch (...) {
        config_error(line, "expected an unsigned integer seed");
      }
    }};
    t["decay.f_power"] = num(&ScenarioConfig::f_power);
    t["decay.weight_kind"] = str(&ScenarioConfig::weight_kind);
    t["decay.weight_a"] = num(&ScenarioConfig::weight_a);
    t["decay.weight_theta"] = num(&ScenarioConfig::weight_theta);
    t["grids.t_grid"] = numlist(&ScenarioConfig::t_grid);
    t["grids.s_grid"] = numlist(&ScenarioConfig::s_grid);
    t["grids.x_grid"] = numlist(&ScenarioConfig::x_grid);
    t["weights.gamma"] = num(&ScenarioConfig::gamma);
    t["tolerances.tol_audit"] = num(&ScenarioConfig::tol_audit);
    t["tolerances.tol_reconstruction"] = num(&ScenarioConfig::tol_reconstruction);
    t["tolerances.tol_unitarity"] = num(&ScenarioConfig::tol_unitarity);
    t["tolerances.tol_transport"] = num(&ScenarioConfig::tol_transport);
    t["cutoffs.cutoff_T"] = num(&ScenarioConfig::cutoff_T);
    t["cutoffs.quad_step"] = num(&ScenarioConfig::quad_step);
    t["cutoffs.ode_step"] = num(&ScenarioConfig::ode_step);
    t["cutoffs.gap_window"] = num(&ScenarioConfig::gap_window);
    t["output.out_dir"] = str(&ScenarioConfig::out_dir);
    t["output.parallelism"] = KeySetter{[](ScenarioConfig& c,
                                           const std::string& v, int line) {
      c.parallelism = static_cast<int>(parse_num(v, line));
    }};
    return t;
  }();
  return table;
}

const std::vector<std::string> kPipelines = {
    "lr",  "difference", "localization", "transform", "weights",
    "flow", "gap",       "equivalence",  "appendix"};

SiteSet range_set(int N) {
  SiteSet vol;
  for (int i = 0; i < N; ++i) vol.push_back(i);
  return vol;
}

// Model construction from the config.  Chain presets require nu = 1.
struct ModelBundle {
  Interaction Phi;
  MetricSpace Gm;
  SiteSet volume;
};

ModelBundle build_model(const ScenarioConfig& cfg) {
  ModelBundle m{Interaction{}, build_box(cfg.nu, cfg.lengths), {}};
  int total = 1;
  for (int L : cfg.lengths) total *= L;
  m.volume = range_set(total);
  if (cfg.preset == "tfi_chain") {
    if (cfg.nu != 1) throw std::invalid_argument("tfi_chain requires nu = 1");
    const int N = cfg.lengths[0];
    if (cfg.h0 == cfg.h1) {
      m.Phi = tfi_chain(N, cfg.J, cfg.h0);
    } else {
      const double h0 = cfg.h0, h1 = cfg.h1;
      m.Phi = tfi_chain_t(
          N, cfg.J, [h0, h1](double s) { return h0 + (h1 - h0) * s; },
          [h0, h1](double) { return h1 - h0; });
    }
  } else if (cfg.preset == "xy_chain") {
    if (cfg.nu != 1) throw std::invalid_argument("xy_chain requires nu = 1");
    m.Phi = xy_chain(cfg.lengths[0], cfg.J);
  } else if (cfg.preset == "classical_ising_chain") {
    if (cfg.nu != 1) {
      throw std::invalid_argument("classical_ising_chain requires nu = 1");
    }
    m.Phi = classical_ising_chain(cfg.lengths[0], cfg.J);
  } else if (cfg.preset == "random_local") {
    m.Phi = random_local(m.Gm, cfg.range, cfg.seed, cfg.strength);
  } else {
    throw std::invalid_argument("unknown model preset: " + cfg.preset);
  }
  return m;
}

DecayFunction build_decay(const ScenarioConfig& cfg) {
  const DecayFunction base = DecayFunction::power(cfg.f_power);
  if (cfg.weight_kind == "none") return base;
  if (cfg.weight_kind == "power") {
    return weighted_f(base, Weight::power(cfg.weight_a, cfg.weight_theta));
  }
  if (cfg.weight_kind == "log") {
    return weighted_f(base, Weight::log(cfg.weight_a));
  }
  throw std::invalid_argument("unknown weight kind: " + cfg.weight_kind);
}

ReportRow make_row(const std::string& what, double lhs, double rhs,
                   double tol) {
  ReportRow r;
  r.what = what;
  r.lhs = lhs;
  r.rhs = rhs;
  r.tolerance = tol;
  r.pass = lhs <= rhs + tol;
  r.slack = (rhs + tol) / std::max(lhs, 1e-300);
  return r;
}

ReportRow from_check(const BoundCheck& c, double tol) {
  return make_row(c.what, c.lhs, c.rhs, tol);
}

std::string checks_csv(const std::vector<ReportRow>& rows) {
  std::string out = "what,lhs,rhs,tolerance,pass,slack\n";
  for (const ReportRow& r : rows) {
    out += r.what + "," + format_double(r.lhs) + "," + format_double(r.rhs) +
           "," + format_double(r.tolerance) + "," + (r.pass ? "1" : "0") +
           "," + format_double(r.slack) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

void pipeline_weights(const ScenarioConfig& cfg, RunReport& rep) {
  const double g = cfg.gamma;
  std::vector<double> xs = cfg.x_grid;
  if (xs.empty()) xs = linspace(0.0, 40.0 / g, 401);
  std::string csv = "t,w_gamma,W_gamma\n";
  double min_w = 1e300;
  for (double t : xs) {
    const double w = w_eval(t, g);
    const double W = W_eval(std::abs(t), g) * (t < 0 ? -1.0 : 1.0);
    min_w = std::min(min_w, w);
    csv += format_double(t) + "," + format_double(w) + "," +
           format_double(t == 0.0 ? 0.5 : W) + "\n";
  }
  rep.tables["weights"] = csv;

  const FourierProbes pr = make_fourier_probes(g, cfg.cutoff_T, cfg.quad_step);
  rep.rows.push_back(
      make_row("|int w_gamma - 1|", std::abs(pr.m_F(0.0) - 1.0), 0.0,
               cfg.tol_audit));
  rep.rows.push_back(make_row("|W_gamma(0) - 1/2|",
                              std::abs(W_eval(0.0, g) - 0.5), 0.0, 1e-15));
  rep.rows.push_back(make_row("w_gamma >= 0 on the grid", -min_w, 0.0, 1e-15));
  const double k_edge = 1.05 * g;
  rep.rows.push_back(
      make_row("Fourier transform magnitude outside the support at k=1.05*gamma",
               std::abs(pr.m_F(k_edge)) / std::sqrt(2.0 * 3.14159265358979323846),
               0.0, 1e-4));
}

void pipeline_lr(const ScenarioConfig& cfg, RunReport& rep) {
  const ModelBundle m = build_model(cfg);
  const HilbertStructure HS(m.volume);
  const DecayFunction F = build_decay(cfg);
  const LocalOperator A{{m.volume.front()}, pauli(1)};
  const LocalOperator B{{m.volume.back()}, pauli(1)};
  const std::vector<LRSample> samples =
      lr_audit(m.Phi, F, m.Gm, m.volume, HS, A, B, 0.0, cfg.t_grid);
  std::string csv = "t,exact,bound\n";
  for (const LRSample& s : samples) {
    csv += format_double(s.t) + "," + format_double(s.exact) + "," +
           format_double(s.bound) + "\n";
    rep.rows.push_back(make_row("lr commutator at t=" + format_double(s.t),
                                s.exact, std::min(2.0, s.bound),
                                cfg.tol_audit));
  }
  rep.tables["lr"] = csv;
}

void pipeline_difference(const ScenarioConfig& cfg, RunReport& rep) {
  const ModelBundle m = build_model(cfg);
  const HilbertStructure HS(m.volume);
  const DecayFunction F = build_decay(cfg);
  const LocalOperator A{{m.volume.front()}, pauli(1)};
  const double t = cfg.t_grid.back();

  // Volume restriction: drop the last two sites.
  if (m.volume.size() < 3) throw std::invalid_argument("volume too small");
  SiteSet sub(m.volume.begin(), m.volume.end() - 2);
  const DifferenceAudit dv =
      volume_difference_audit(m.Phi, F, m.Gm, m.volume, sub, HS, A, 0.0, t);
  rep.rows.push_back(make_row("volume restriction difference", dv.exact,
                              dv.bound, 1e-12));

  // 1% coupling perturbation of the same preset.
  ScenarioConfig pc = cfg;
  pc.J = cfg.J * 1.01;
  const ModelBundle mp = build_model(pc);
  const DifferenceAudit di = interaction_difference_audit(
      m.Phi, mp.Phi, F, m.Gm, m.volume, HS, A, 0.0, t);
  rep.rows.push_back(make_row("coupling perturbation difference", di.exact,
                              di.bound, 1e-12));
}

void pipeline_localization(const ScenarioConfig& cfg, RunReport& rep) {
  int total = 1;
  for (int L : cfg.lengths) total *= L;
  const SiteSet vol = range_set(total);
  const MetricSpace Gm = build_box(cfg.nu, cfg.lengths);
  const HilbertStructure HS(vol);
  const ProductState rho = ProductState::tracial();
  const int nx = std::max(1, total / 2);
  const SiteSet X(vol.begin(), vol.begin() + nx);
  const SiteSet Xc(vol.begin() + nx, vol.end());

  Mat Araw = random_hermitian(static_cast<int>(HS.total_dim()),
                              split_seed(cfg.seed, 1));
  const LocalOperator A{vol, (Araw / opnorm(Araw)).eval()};

  const LocalOperator PA = conditional_expectation(A, X, rho, HS);
  const LocalOperator PPA = conditional_expectation(PA, X, rho, HS);
  rep.rows.push_back(make_row("unit preservation",
                              opnorm((conditional_expectation(
                                          LocalOperator{vol,
                                                        Mat::Identity(
                                                            HS.total_dim(),
                                                            HS.total_dim())},
                                          X, rho, HS)
                                          .matrix -
                                      Mat::Identity(HS.total_dim(),
                                                    HS.total_dim()))
                                         .eval()),
                              0.0, 1e-12));
  rep.rows.push_back(make_row("idempotence",
                              opnorm((PPA.matrix - PA.matrix).eval()), 0.0,
                              1e-12));
  rep.rows.push_back(make_row("contraction", opnorm(PA), opnorm(A), 1e-12));

  const Mat Bx = embed(LocalOperator{
                           X, random_hermitian(static_cast<int>(HS.dim(X)),
                                               split_seed(cfg.seed, 2))},
                       vol, HS)
                     .matrix;
  const LocalOperator BA{vol, (Bx * A.matrix).eval()};
  rep.rows.push_back(make_row(
      "bimodule property",
      opnorm((conditional_expectation(BA, X, rho, HS).matrix - Bx * PA.matrix)
                 .eval()),
      0.0, 1e-12));

  const Mat Ec = embed(LocalOperator{
                           Xc, random_hermitian(static_cast<int>(HS.dim(Xc)),
                                                split_seed(cfg.seed, 3))},
                       vol, HS)
                     .matrix;
  rep.rows.push_back(make_row("commutation with the complement",
                              opnorm(commutator(PA.matrix, Ec)), 0.0, 1e-12));

  // Telescoping sum of the shell decomposition.
  Mat tele = Mat::Zero(HS.total_dim(), HS.total_dim());
  const int n_max = static_cast<int>(std::lround(Gm.diameter())) + 1;
  for (int n = 0; n <= n_max; ++n) {
    tele += local_decomposition(A, Gm, X, n, rho, HS).matrix;
  }
  rep.rows.push_back(make_row("telescoping shell sum",
                              opnorm((tele - A.matrix).eval()), 0.0, 1e-12));

  // Engineered epsilon-localized operator: B on X plus a small remainder.
  const double eps = 1e-3;
  Mat Enoise = random_hermitian(static_cast<int>(HS.total_dim()),
                                split_seed(cfg.seed, 4));
  Enoise /= opnorm(Enoise);
  const LocalOperator Aeps{vol, (Bx / opnorm(Bx) + eps * Enoise).eval()};
  const LocalOperator PAeps = conditional_expectation(Aeps, X, rho, HS);
  rep.rows.push_back(make_row("near-local approximation",
                              opnorm((PAeps.matrix - Aeps.matrix).eval()),
                              2.0 * eps, 1e-10));
}

void pipeline_transform(const ScenarioConfig& cfg, RunReport& rep) {
  const ModelBundle m = build_model(cfg);
  const HilbertStructure HS(m.volume);
  const DecayFunction F0 = DecayFunction::power(cfg.f_power);
  const double t = cfg.t_grid.back();
  const QuasiLocalMap K = heisenberg_map(m.Phi, F0, cfg.weight_a, m.Gm,
                                         m.volume, HS, 0.0, t);
  const TransformedInteraction TI = transform_interaction(
      K, m.Phi, m.Gm, m.volume, HS, ProductState::tracial());
  for (double s : cfg.t_grid) {
    rep.rows.push_back(make_row(
        "reconstruction residual at t=" + format_double(s),
        TI.reconstruction_residual(s), 0.0, cfg.tol_reconstruction));
  }
  const std::vector<BoundCheck> decays = transform_decay_audit(
      TI, m.Phi, K.params, build_decay(cfg), m.Gm, t,
      static_cast<double>(cfg.nu), 2.0);
  for (const BoundCheck& c : decays) rep.rows.push_back(from_check(c, 1e-12));
}

void pipeline_flow(const ScenarioConfig& cfg, RunReport& rep) {
  const ModelBundle m = build_model(cfg);
  const HilbertStructure HS(m.volume);
  const TransportAudit A = projector_transport_audit(
      m.Phi, m.volume, HS, cfg.gamma, cfg.s_grid, cfg.ode_step,
      cfg.gap_window, cfg.cutoff_T, cfg.quad_step);
  std::string csv = "s,residual\n";
  for (std::size_t k = 0; k < A.s.size(); ++k) {
    csv += format_double(A.s[k]) + "," + format_double(A.residual[k]) + "\n";
  }
  rep.tables["flow"] = csv;
  rep.rows.push_back(make_row("max transport residual", A.max_residual,
                              cfg.tol_transport, 0.0));
  rep.rows.push_back(make_row("residual within 10x the error budget",
                              A.max_residual, 10.0 * A.budget(), 0.0));
}

void pipeline_gap(const ScenarioConfig& cfg, RunReport& rep) {
  const ModelBundle m = build_model(cfg);
  const GapProfile prof =
      gap_audit(m.Phi, {m.volume}, cfg.s_grid, cfg.gap_window);
  std::string csv = "s,gap,cluster_width,cluster_size,gapped\n";
  for (const GapPoint& p : prof.points) {
    csv += format_double(p.s) + "," + format_double(p.gap) + "," +
           format_double(p.cluster_width) + "," +
           std::to_string(p.cluster_size) + "," + (p.gapped ? "1" : "0") +
           "\n";
  }
  rep.tables["gap"] = csv;
  ReportRow r = make_row("uniform gap >= window", cfg.gap_window,
                         prof.gamma_prime, 0.0);
  r.pass = prof.gapped;
  rep.rows.push_back(r);
}

void pipeline_equivalence(const ScenarioConfig& cfg, RunReport& rep) {
  const ModelBundle m = build_model(cfg);
  const HilbertStructure HS(m.volume);
  const EquivalenceReport E =
      automorphic_equivalence_audit(m.Phi, m.volume, HS, cfg.gamma,
                                    cfg.s_grid, cfg.ode_step, cfg.cutoff_T,
                                    cfg.quad_step);
  std::string csv = "k,l,residual\n";
  for (Eigen::Index k = 0; k < E.residuals.rows(); ++k) {
    for (Eigen::Index l = 0; l < E.residuals.cols(); ++l) {
      csv += std::to_string(k) + "," + std::to_string(l) + "," +
             format_double(E.residuals(k, l)) + "\n";
    }
  }
  rep.tables["equivalence"] = csv;
  rep.rows.push_back(make_row("max equivalence residual", E.max_residual,
                              cfg.tol_transport, 0.0));
  if (E.one_dimensional) {
    rep.rows.push_back(make_row("ground-state fidelity deficit",
                                1.0 - E.min_fidelity, cfg.tol_transport, 0.0));
  }
}

void pipeline_appendix(const ScenarioConfig& cfg, RunReport& rep) {
  const ModelBundle m = build_model(cfg);
  const DecayFunction F = build_decay(cfg);
  // Reference set: the first site; radius spanning half the lattice.
  const SiteSet X = {m.volume.front()};
  const double R = std::max(1.0, std::floor(m.Gm.diameter() / 2.0));
  const std::vector<BoundCheck> checks =
      appendix_sum_audit(m.Phi, F, m.Gm, X, R, cfg.f_power, cfg.t_grid.back(),
                         static_cast<double>(cfg.nu), 2.0);
  for (const BoundCheck& c : checks) rep.rows.push_back(from_check(c, 1e-12));
}

}  // namespace

// ============================================================================
// Config parsing / validation / serialization
// ============================================================================

void ScenarioConfig::validate() const {
  if (std::find(kPipelines.begin(), kPipelines.end(), pipeline) ==
      kPipelines.end()) {
    throw std::invalid_argument("unknown pipeline: " + pipeline);
  }
  if (nu < 1 || nu > 3) throw std::invalid_argument("nu must be in {1,2,3}");
  if (lengths.empty() || static_cast<int>(lengths.size()) != nu) {
    throw std::invalid_argument("lengths must list one extent per dimension");
  }
  for (int L : lengths) {
    if (L < 1) throw std::invalid_argument("lattice extents must be positive");
  }
  static const std::vector<std::string> presets = {
      "tfi_chain", "xy_chain", "classical_ising_chain", "random_local"};
  if (std::find(presets.begin(), presets.end(), preset) == presets.end()) {
    throw std::invalid_argument("unknown model preset: " + preset);
  }
  if (t_grid.empty() || s_grid.empty()) {
    throw std::invalid_argument("grids must be non-empty");
  }
  for (double tol : {tol_audit, tol_reconstruction, tol_unitarity,
                     tol_transport}) {
    if (!(tol > 0.0)) {
      throw std::invalid_argument("tolerances must be positive");
    }
  }
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  if (!(ode_step > 0.0)) throw std::invalid_argument("ode_step must be positive");
  if (!(gap_window > 0.0)) {
    throw std::invalid_argument("gap_window must be positive");
  }
  if (!(f_power > 0.0)) throw std::invalid_argument("f_power must be positive");
  if (parallelism != 1 && parallelism != 8) {
    throw std::invalid_argument("parallelism must be 1 or 8");
  }
}

ScenarioConfig parse_config_text(const std::string& text) {
  ScenarioConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') config_error(lineno, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) config_error(lineno, "expected key = value");
    const std::string key = section + "." + trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = key_table().find(key);
    if (it == key_table().end()) config_error(lineno, "unknown key: " + key);
    it->second.set(cfg, value, lineno);
  }
  cfg.validate();
  return cfg;
}

ScenarioConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string serialize_config(const ScenarioConfig& c) {
  std::ostringstream out;
  auto list_d = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      s += (i ? "," : "") + format_double(v[i]);
    }
    return s;
  };
  std::string lengths_s;
  for (std::size_t i = 0; i < c.lengths.size(); ++i) {
    lengths_s += (i ? "," : "") + std::to_string(c.lengths[i]);
  }
  out << "[scenario]\nname = " << c.name << "\npipeline = " << c.pipeline
      << "\n[lattice]\nnu = " << c.nu << "\nlengths = " << lengths_s
      << "\n[model]\npreset = " << c.preset << "\nJ = " << format_double(c.J)
      << "\nh0 = " << format_double(c.h0) << "\nh1 = " << format_double(c.h1)
      << "\nrange = " << format_double(c.range)
      << "\nstrength = " << format_double(c.strength) << "\nseed = " << c.seed
      << "\n[decay]\nf_power = " << format_double(c.f_power)
      << "\nweight_kind = " << c.weight_kind
      << "\nweight_a = " << format_double(c.weight_a)
      << "\nweight_theta = " << format_double(c.weight_theta)
      << "\n[grids]\nt_grid = " << list_d(c.t_grid)
      << "\ns_grid = " << list_d(c.s_grid)
      << "\nx_grid = " << list_d(c.x_grid)
      << "\n[weights]\ngamma = " << format_double(c.gamma)
      << "\n[tolerances]\ntol_audit = " << format_double(c.tol_audit)
      << "\ntol_reconstruction = " << format_double(c.tol_reconstruction)
      << "\ntol_unitarity = " << format_double(c.tol_unitarity)
      << "\ntol_transport = " << format_double(c.tol_transport)
      << "\n[cutoffs]\ncutoff_T = " << format_double(c.cutoff_T)
      << "\nquad_step = " << format_double(c.quad_step)
      << "\node_step = " << format_double(c.ode_step)
      << "\ngap_window = " << format_double(c.gap_window)
      << "\n[output]\nout_dir = " << c.out_dir
      << "\nparallelism = " << c.parallelism << "\n";
  return out.str();
}

std::string config_hash(const ScenarioConfig& cfg) {
  const std::string s = serialize_config(cfg);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

// ============================================================================
// run / sweep
// ============================================================================

RunReport run(const ScenarioConfig& cfg) {
  cfg.validate();
  RunReport rep;
  rep.pipeline = cfg.pipeline;
  rep.hash = config_hash(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.pipeline == "weights") {
    pipeline_weights(cfg, rep);
  } else if (cfg.pipeline == "lr") {
    pipeline_lr(cfg, rep);
  } else if (cfg.pipeline == "difference") {
    pipeline_difference(cfg, rep);
  } else if (cfg.pipeline == "localization") {
    pipeline_localization(cfg, rep);
  } else if (cfg.pipeline == "transform") {
    pipeline_transform(cfg, rep);
  } else if (cfg.pipeline == "flow") {
    pipeline_flow(cfg, rep);
  } else if (cfg.pipeline == "gap") {
    pipeline_gap(cfg, rep);
  } else if (cfg.pipeline == "equivalence") {
    pipeline_equivalence(cfg, rep);
  } else if (cfg.pipeline == "appendix") {
    pipeline_appendix(cfg, rep);
  }
  rep.tables["checks"] = checks_csv(rep.rows);
  rep.pass = !rep.rows.empty();
  for (const ReportRow& r : rep.rows) rep.pass = rep.pass && r.pass;
  rep.wall_seconds = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - t0)
                         .count();
  return rep;
}

std::string RunReport::manifest_json(const ScenarioConfig& cfg) const {
  nlohmann::json j;
  j["pipeline"] = pipeline;
  j["scenario"] = cfg.name;
  j["config_hash"] = hash;
  j["pass"] = pass;
  j["wall_seconds"] = wall_seconds;
  j["versions"] = {{"qlv", "1.0.0"},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)}};
  j["cutoffs"] = {{"cutoff_T", cfg.cutoff_T},
                  {"quad_step", cfg.quad_step},
                  {"ode_step", cfg.ode_step},
                  {"gap_window", cfg.gap_window},
                  {"gamma", cfg.gamma}};
  nlohmann::json rows_j = nlohmann::json::array();
  for (const ReportRow& r : rows) {
    rows_j.push_back({{"what", r.what},
                      {"lhs", r.lhs},
                      {"rhs", r.rhs},
                      {"tolerance", r.tolerance},
                      {"pass", r.pass},
                      {"slack", r.slack}});
  }
  j["rows"] = rows_j;
  j["config"] = serialize_config(cfg);
  return j.dump(2) + "\n";
}

RunReport run_and_write(const ScenarioConfig& cfg) {
  RunReport rep = run(cfg);
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  for (const auto& [table, bytes] : rep.tables) {
    std::ofstream out(fs::path(cfg.out_dir) /
                      (cfg.name + "-" + table + ".csv"),
                      std::ios::binary);
    out << bytes;
  }
  std::ofstream mf(fs::path(cfg.out_dir) / (cfg.name + "-manifest.json"),
                   std::ios::binary);
  mf << rep.manifest_json(cfg);
  return rep;
}

void set_axis(ScenarioConfig& cfg, const std::string& axis, double value) {
  static const std::map<std::string, double ScenarioConfig::*> axes = {
      {"gamma", &ScenarioConfig::gamma},
      {"J", &ScenarioConfig::J},
      {"h0", &ScenarioConfig::h0},
      {"h1", &ScenarioConfig::h1},
      {"f_power", &ScenarioConfig::f_power},
      {"weight_a", &ScenarioConfig::weight_a},
      {"weight_theta", &ScenarioConfig::weight_theta},
      {"ode_step", &ScenarioConfig::ode_step},
      {"gap_window", &ScenarioConfig::gap_window},
      {"range", &ScenarioConfig::range},
      {"strength", &ScenarioConfig::strength},
      {"tol_transport", &ScenarioConfig::tol_transport}};
  const auto it = axes.find(axis);
  if (it == axes.end()) {
    throw std::invalid_argument("unknown sweep axis: " + axis);
  }
  cfg.*(it->second) = value;
}

SweepResult sweep(const ScenarioConfig& base, const std::string& axis,
                  const std::vector<double>& values, int parallelism,
                  bool fail_fast) {
  if (values.empty()) throw std::invalid_argument("sweep needs values");
  if (parallelism != 1 && parallelism != 8) {
    throw std::invalid_argument("parallelism must be 1 or 8");
  }
  SweepResult res;
  res.axis = axis;
  res.values = values;
  res.reports.resize(values.size());
  std::vector<std::string> errors(values.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= values.size() || stop.load()) return;
      ScenarioConfig cfg = base;
      set_axis(cfg, axis, values[i]);
      // Deterministic per-instance seed from (base seed, axis value bits).
      std::uint64_t bits;
      static_assert(sizeof(bits) == sizeof(double));
      std::memcpy(&bits, &values[i], sizeof(bits));
      cfg.seed = split_seed(base.seed, bits);
      cfg.name = base.name + "-" + axis + "-" + format_double(values[i]);
      try {
        res.reports[i] = run(cfg);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        RunReport rep;
        rep.pipeline = cfg.pipeline;
        rep.hash = config_hash(cfg);
        ReportRow r;
        r.what = std::string("instance error: ") + e.what();
        r.pass = false;
        rep.rows.push_back(r);
        rep.tables["checks"] = checks_csv(rep.rows);
        res.reports[i] = rep;
      }
      if (fail_fast && !res.reports[i].pass) stop.store(true);
    }
  };

  if (parallelism == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < parallelism; ++k) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  res.pass = true;
  for (const RunReport& r : res.reports) res.pass = res.pass && r.pass;
  return res;
}

std::string SweepResult::aggregate_csv() const {
  // Merged strictly in axis order: identical bytes for any thread count.
  std::string out = "axis_value,what,lhs,rhs,tolerance,pass\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (const ReportRow& r : reports[i].rows) {
      out += format_double(values[i]) + "," + r.what + "," +
             format_double(r.lhs) + "," + format_double(r.rhs) + "," +
             format_double(r.tolerance) + "," + (r.pass ? "1" : "0") + "\n";
    }
  }
  return out;
}

// ============================================================================
// Catalog / weights table
// ============================================================================

std::vector<CatalogEntry> catalog() {
  return {
      {"tfi_chain", "N, J, h0, h1 (field schedule h(s) = h0 + (h1-h0)s)",
       "N = 4..10",
       "transverse-field Ising chain; gapped for |h| > |J|"},
      {"xy_chain", "N, J", "N = 4..10", "isotropic XY chain"},
      {"classical_ising_chain", "N, J", "N = 4..12",
       "diagonal coupling; two-fold degenerate ground cluster (width 0)"},
      {"random_local", "nu, lengths, range, seed, strength", "total <= 10",
       "random Hermitian terms on every set of diameter <= range; "
       "deterministic in seed"},
  };
}

std::string catalog_text() {
  std::string out;
  for (const CatalogEntry& e : catalog()) {
    out += e.preset + "\n  parameters: " + e.parameters +
           "\n  recommended: " + e.recommended + "\n  " + e.note + "\n";
  }
  return out;
}

std::string weights_table_csv(double gamma, double t_max, int nodes) {
  if (!(gamma > 0.0) || !(t_max > 0.0) || nodes < 2) {
    throw std::invalid_argument("weights_table_csv: bad arguments");
  }
  std::string out = "t,w_gamma,W_gamma\n";
  for (double t : linspace(0.0, t_max, nodes)) {
    out += format_double(t) + "," + format_double(w_eval(t, gamma)) + "," +
           format_double(t == 0.0 ? 0.5 : W_eval(t, gamma)) + "\n";
  }
  return out;
}

}  // namespace qlv
