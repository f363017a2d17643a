#include "qlv/interactions.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace qlv {

void Interaction::validate(const HilbertStructure& H) const {
  const double samples[] = {t0, 0.5 * (t0 + t1), t1};
  for (size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].X.empty())
      throw std::invalid_argument("Interaction: empty term support");
    for (double t : samples) {
      const Mat m = terms[i].op(t);
      if (m.rows() != H.dim(terms[i].X))
        throw std::invalid_argument("Interaction: term dim mismatch");
      if (!is_hermitian(m, 1e-12))
        throw std::invalid_argument("Interaction: non-Hermitian term");
    }
  }
}

Interaction linear_combination(double a, const Interaction& Phi, double b,
                               const Interaction& Psi) {
  Interaction out;
  out.name = "lincomb(" + Phi.name + "," + Psi.name + ")";
  out.t0 = std::min(Phi.t0, Psi.t0);
  out.t1 = std::max(Phi.t1, Psi.t1);
  out.time_dependent = Phi.time_dependent || Psi.time_dependent;
  out.c1 = Phi.c1 && Psi.c1;
  std::map<SiteSet, std::vector<std::pair<double, const InteractionTerm*>>>
      by_support;
  for (const auto& term : Phi.terms) by_support[term.X].emplace_back(a, &term);
  for (const auto& term : Psi.terms) by_support[term.X].emplace_back(b, &term);
  for (const auto& [X, parts] : by_support) {
    InteractionTerm t;
    t.X = X;
    auto parts_copy = parts;
    t.op = [parts_copy](double s) {
      Mat m = parts_copy.front().first * parts_copy.front().second->op(s);
      for (size_t i = 1; i < parts_copy.size(); ++i)
        m += parts_copy[i].first * parts_copy[i].second->op(s);
      return m;
    };
    bool has_d = true;
    for (const auto& [c, p] : parts)
      if (!p->dop) has_d = false;
    if (has_d) {
      t.dop = [parts_copy](double s) {
        Mat m = parts_copy.front().first * parts_copy.front().second->dop(s);
        for (size_t i = 1; i < parts_copy.size(); ++i)
          m += parts_copy[i].first * parts_copy[i].second->dop(s);
        return m;
      };
    }
    out.terms.push_back(std::move(t));
  }
  return out;
}

// ============================================================================
// F-norms
// ============================================================================

InteractionNormReport f_norm_report(const Interaction& Phi,
                                    const DecayFunction& F,
                                    const MetricSpace& G, double t) {
  InteractionNormReport rep;
  const int n = G.size();
  rep.pair_sums = Eigen::MatrixXd::Zero(n, n);
  for (size_t i = 0; i < Phi.terms.size(); ++i) {
    const auto& X = Phi.terms[i].X;
    const double nrm = Phi.term_norm(i, t);
    if (nrm == 0.0) continue;
    for (int x : X)
      for (int y : X) rep.pair_sums(x, y) += nrm;
  }
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) {
      if (rep.pair_sums(x, y) == 0.0) continue;
      const double v = rep.pair_sums(x, y) / F(G.dist(x, y));
      if (v > rep.f_norm) {
        rep.f_norm = v;
        rep.arg_x = x;
        rep.arg_y = y;
      }
    }
  return rep;
}

double f_norm(const Interaction& Phi, const DecayFunction& F,
              const MetricSpace& G, double t) {
  return f_norm_report(Phi, F, G, t).f_norm;
}

// ============================================================================
// Hamiltonians
// ============================================================================

LocalOperator hamiltonian(const Interaction& Phi, const SiteSet& volume,
                          double t, const HilbertStructure& H,
                          const std::vector<InteractionTerm>& onsite) {
  const long long d = H.dim(volume);
  LocalOperator out{volume, Mat::Zero(d, d)};
  for (size_t i = 0; i < Phi.terms.size(); ++i) {
    if (!is_subset(Phi.terms[i].X, volume)) continue;
    out.matrix +=
        embed({Phi.terms[i].X, Phi.terms[i].op(t)}, volume, H).matrix;
  }
  for (const auto& term : onsite) {
    if (!is_subset(term.X, volume)) continue;
    out.matrix += embed({term.X, term.op(t)}, volume, H).matrix;
  }
  return out;
}

LocalOperator hamiltonian_derivative(const Interaction& Phi,
                                     const SiteSet& volume, double t,
                                     const HilbertStructure& H) {
  const long long d = H.dim(volume);
  LocalOperator out{volume, Mat::Zero(d, d)};
  for (size_t i = 0; i < Phi.terms.size(); ++i) {
    if (!is_subset(Phi.terms[i].X, volume)) continue;
    if (!Phi.terms[i].dop)
      throw std::runtime_error("hamiltonian_derivative: missing derivative");
    out.matrix +=
        embed({Phi.terms[i].X, Phi.terms[i].dop(t)}, volume, H).matrix;
  }
  return out;
}

// ============================================================================
// Phi-boundary, I_{t,s}, moments
// ============================================================================

PhiBoundary phi_boundary(const Interaction& Phi, const SiteSet& X,
                         const SiteSet& volume) {
  if (!is_subset(X, volume))
    throw std::domain_error("phi_boundary: X not inside volume");
  PhiBoundary out;
  out.X = X;
  const SiteSet comp = set_difference(volume, X);
  const double samples[] = {Phi.t0, 0.5 * (Phi.t0 + Phi.t1), Phi.t1};
  for (size_t i = 0; i < Phi.terms.size(); ++i) {
    const auto& Z = Phi.terms[i].X;
    if (set_intersection(Z, comp).empty()) continue;
    bool active = false;
    for (double t : samples)
      if (Phi.term_norm(i, t) > 0.0) {
        active = true;
        break;
      }
    if (!active) continue;
    for (int x : set_intersection(Z, X)) out.boundary.push_back(x);
  }
  out.boundary = make_site_set(std::move(out.boundary));
  return out;
}

namespace {

double simpson_rec(const std::function<double(double)>& f, double a, double b,
                   double fa, double fm, double fb, double whole, double tol,
                   int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth > 40)
    throw std::runtime_error("adaptive_simpson: tolerance not reached");
  if (std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth + 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth + 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double abs_tol) {
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, abs_tol, 0);
}

double its_integral(const Interaction& Phi, const DecayFunction& F,
                    const MetricSpace& G, double s, double t, double abs_tol) {
  if (s == t) return 0.0;
  const double a = std::min(s, t), b = std::max(s, t);
  const double cf = f_constants(F, G).conv_constant;
  if (!Phi.time_dependent) return cf * f_norm(Phi, F, G, a) * (b - a);
  const auto integrand = [&](double r) { return f_norm(Phi, F, G, r); };
  return cf * adaptive_simpson(integrand, a, b, abs_tol);
}

Interaction moment_interaction(const Interaction& Phi, double p) {
  Interaction out = Phi;
  out.name = Phi.name + "_moment";
  for (auto& term : out.terms) {
    const double w = std::pow(static_cast<double>(term.X.size()), p);
    auto op = term.op;
    term.op = [op, w](double t) { return Mat(w * op(t)); };
    if (term.dop) {
      auto dop = term.dop;
      term.dop = [dop, w](double t) { return Mat(w * dop(t)); };
    }
  }
  return out;
}

// ============================================================================
// Appendix sum-bound audits
// ============================================================================

std::vector<BoundCheck> appendix_sum_audit(const Interaction& Phi,
                                           const DecayFunction& F,
                                           const MetricSpace& G,
                                           const SiteSet& X, double R,
                                           double p, double t, double nu,
                                           double kappa) {
  std::vector<BoundCheck> out;
  const FConstants kF = f_constants(F, G);
  const double phi_norm = f_norm(Phi, F, G, t);
  const SiteSet XR = inflate(G, X, R);
  const SiteSet all = G.all_sites();

  // --- distance sums -------------------------------------------------------
  {
    BoundCheck c;
    c.what = "distance_close";
    double rhs_mid = 0.0;
    for (int x : XR)
      for (int y : all) rhs_mid += F(G.dist(x, y));
    for (size_t i = 0; i < Phi.terms.size(); ++i)
      if (G.dist_sets(Phi.terms[i].X, X) <= R) c.lhs += Phi.term_norm(i, t);
    c.rhs = phi_norm * rhs_mid;
    out.push_back(c);
    BoundCheck c2;
    c2.what = "distance_close_coarse";
    c2.lhs = c.lhs;
    c2.rhs = static_cast<double>(XR.size()) * kF.uniform_norm * phi_norm;
    out.push_back(c2);
  }
  {
    BoundCheck c;
    c.what = "distance_far";
    for (size_t i = 0; i < Phi.terms.size(); ++i) {
      if (G.dist_sets(Phi.terms[i].X, X) <= R) continue;
      double fsum = 0.0;
      for (int x : X)
        for (int z : Phi.terms[i].X) fsum += F(G.dist(x, z));
      c.lhs += Phi.term_norm(i, t) * fsum;
    }
    double rhs_sum = 0.0;
    for (int x : X)
      for (int y : set_difference(all, XR)) rhs_sum += F(G.dist(x, y));
    c.rhs = kF.conv_constant * phi_norm * rhs_sum;
    out.push_back(c);
  }

  // --- diameter sums -------------------------------------------------------
  {
    BoundCheck cs, cl;
    cs.what = "diameter_small";
    cl.what = "diameter_large";
    for (int x : all) {
      double small = 0.0, large = 0.0;
      for (size_t i = 0; i < Phi.terms.size(); ++i) {
        if (!set_contains(Phi.terms[i].X, x)) continue;
        if (G.diameter(Phi.terms[i].X) <= R)
          small += Phi.term_norm(i, t);
        else
          large += Phi.term_norm(i, t);
      }
      cs.lhs = std::max(cs.lhs, small);
      cl.lhs = std::max(cl.lhs, large);
    }
    cs.rhs = phi_norm * kF.uniform_norm;
    cl.rhs = kappa * kappa * phi_norm * moment(F, 2.0 * nu, R).value;
    out.push_back(cs);
    out.push_back(cl);
  }

  // --- interaction moments -------------------------------------------------
  {
    const Interaction Phip = moment_interaction(Phi, p);
    BoundCheck c;
    c.what = "interaction_moment";
    double worst = -std::numeric_limits<double>::infinity();
    for (int x : all)
      for (int y : all) {
        double lhs = 0.0;
        for (size_t i = 0; i < Phip.terms.size(); ++i)
          if (set_contains(Phip.terms[i].X, x) &&
              set_contains(Phip.terms[i].X, y))
            lhs += Phip.term_norm(i, t);
        const double rhs = std::pow(kappa, p + 2.0) * phi_norm *
                           moment(F, (p + 2.0) * nu, G.dist(x, y)).value;
        if (lhs - rhs > worst) {
          worst = lhs - rhs;
          c.lhs = lhs;
          c.rhs = rhs;
        }
      }
    out.push_back(c);
  }

  // --- weighted sums (against G(n) = 2^-n, a fast reference decay) ---------
  {
    BoundCheck c;
    c.what = "weighted_sum";
    const auto Gref = DecayFunction::transformed(
        [](double r) { return std::pow(2.0, -r); }, "2^-r");
    const double diam = G.diameter();
    int wx = -1, wy = -1;
    double worst = -1.0;
    for (int x : all)
      for (int y : all) {
        double lhs = 0.0;
        for (int n = 0; n <= static_cast<int>(diam) + 1; ++n) {
          double s = 0.0;
          for (size_t i = 0; i < Phi.terms.size(); ++i) {
            const SiteSet Xn1 = inflate(G, Phi.terms[i].X, n + 1.0);
            if (set_contains(Xn1, x) && set_contains(Xn1, y))
              s += Phi.term_norm(i, t);
          }
          lhs += Gref(n) * s;
        }
        // beyond diam+1 every inflation covers the space; geometric tail
        double covered = 0.0;
        for (size_t i = 0; i < Phi.terms.size(); ++i)
          covered += Phi.term_norm(i, t);
        lhs += covered * std::pow(2.0, -(static_cast<int>(diam) + 1));
        const double rhs =
            kappa * phi_norm *
            (kappa * moment(Gref, 2.0 * nu + 1.0, 0.0).value *
                 F(G.dist(x, y) / 3.0) +
             kF.uniform_norm *
                 moment(Gref, nu + 1.0, G.dist(x, y) / 3.0).value);
        if (lhs - rhs > worst) {
          worst = lhs - rhs;
          c.lhs = lhs;
          c.rhs = rhs;
          wx = x;
          wy = y;
        }
      }
    (void)wx;
    (void)wy;
    out.push_back(c);
  }
  return out;
}

// ============================================================================
// Presets
// ============================================================================

namespace {

Interaction ising_like(int N, double J, std::function<double(double)> h,
                       std::function<double(double)> dh,
                       const std::string& name) {
  if (N < 1) throw std::invalid_argument("preset: N < 1");
  Interaction Phi;
  Phi.name = name;
  const Mat zz = kron(pauli(3), pauli(3));
  for (int i = 0; i + 1 < N; ++i) {
    InteractionTerm t;
    t.X = {i, i + 1};
    t.op = [J, zz](double) { return Mat(J * zz); };
    t.dop = [zz](double) { return Mat(Mat::Zero(4, 4)); };
    Phi.terms.push_back(std::move(t));
  }
  if (h) {
    const Mat sx = pauli(1);
    for (int i = 0; i < N; ++i) {
      InteractionTerm t;
      t.X = {i};
      t.op = [h, sx](double s) { return Mat(h(s) * sx); };
      if (dh) t.dop = [dh, sx](double s) { return Mat(dh(s) * sx); };
      Phi.terms.push_back(std::move(t));
    }
  }
  Phi.c1 = true;
  return Phi;
}

}  // namespace

Interaction tfi_chain(int N, double J, double h) {
  auto Phi = ising_like(
      N, J, [h](double) { return h; }, [](double) { return 0.0; },
      "tfi_chain");
  Phi.time_dependent = false;
  return Phi;
}

Interaction tfi_chain_t(int N, double J, std::function<double(double)> h,
                        std::function<double(double)> dh) {
  auto Phi = ising_like(N, J, std::move(h), std::move(dh), "tfi_chain_t");
  Phi.time_dependent = true;
  return Phi;
}

Interaction classical_ising_chain(int N, double J) {
  auto Phi = ising_like(N, J, nullptr, nullptr, "classical_ising_chain");
  Phi.time_dependent = false;
  Phi.c1 = true;
  return Phi;
}

Interaction xy_chain(int N, double J) {
  if (N < 2) throw std::invalid_argument("xy_chain: N < 2");
  Interaction Phi;
  Phi.name = "xy_chain";
  const Mat xxyy = kron(pauli(1), pauli(1)) + kron(pauli(2), pauli(2));
  for (int i = 0; i + 1 < N; ++i) {
    InteractionTerm t;
    t.X = {i, i + 1};
    t.op = [J, xxyy](double) { return Mat(J * xxyy); };
    t.dop = [](double) { return Mat(Mat::Zero(4, 4)); };
    Phi.terms.push_back(std::move(t));
  }
  Phi.c1 = true;
  return Phi;
}

Interaction random_local(const MetricSpace& G, double range,
                         unsigned long long seed, double strength) {
  Interaction Phi;
  Phi.name = "random_local";
  unsigned long long counter = 0;
  // one-site terms
  for (int x = 0; x < G.size(); ++x) {
    Mat m = random_hermitian(2, split_seed(seed, counter++));
    m *= strength / std::max(opnorm(m), 1e-12);
    InteractionTerm t;
    t.X = {x};
    t.op = [m](double) { return m; };
    t.dop = [](double) { return Mat(Mat::Zero(2, 2)); };
    Phi.terms.push_back(std::move(t));
  }
  // pair terms within range
  for (int x = 0; x < G.size(); ++x)
    for (int y = x + 1; y < G.size(); ++y) {
      if (G.dist(x, y) > range) continue;
      Mat m = random_hermitian(4, split_seed(seed, counter++));
      m *= strength / std::max(opnorm(m), 1e-12);
      InteractionTerm t;
      t.X = {x, y};
      t.op = [m](double) { return m; };
      t.dop = [](double) { return Mat(Mat::Zero(4, 4)); };
      Phi.terms.push_back(std::move(t));
    }
  Phi.c1 = true;
  return Phi;
}

}  // namespace qlv
