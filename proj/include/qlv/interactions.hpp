#pragma once

// ============================================================================
// interactions: the interaction data model Phi(X,t), its F-norms, local
// Hamiltonians, Phi-boundaries, moments, I_{t,s}, and the appendix sum-bound
// audits.  Terms are callables of the real parameter t; time-independent
// interactions are flagged so that integrals collapse to closed forms.
// ============================================================================

#include "qlv/algebra.hpp"
#include "qlv/decay.hpp"
#include "qlv/lattice.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace qlv {

struct InteractionTerm {
  SiteSet X;
  std::function<Mat(double)> op;   // Hermitian matrix on the span of X
  std::function<Mat(double)> dop;  // optional t-derivative
};

class Interaction {
 public:
  std::vector<InteractionTerm> terms;
  std::string name = "interaction";
  double t0 = 0.0, t1 = 1.0;     // parameter range
  bool time_dependent = false;
  bool c1 = false;               // derivative supplied for every term

  Mat term_matrix(size_t i, double t) const { return terms[i].op(t); }
  double term_norm(size_t i, double t) const {
    return opnorm(terms[i].op(t));
  }
  // Hermiticity of every term at sampled parameters, within 1e-12.
  void validate(const HilbertStructure& H) const;
};

// a*Phi + b*Psi, merging terms with identical support sets.
Interaction linear_combination(double a, const Interaction& Phi, double b,
                               const Interaction& Psi);

// ============================================================================
// F-norms
// ============================================================================

struct InteractionNormReport {
  double f_norm = 0.0;
  int arg_x = -1, arg_y = -1;
  Eigen::MatrixXd pair_sums;  // S(x,y) = sum_{Z containing x,y} ||Phi(Z,t)||
};

InteractionNormReport f_norm_report(const Interaction& Phi,
                                    const DecayFunction& F,
                                    const MetricSpace& G, double t);
double f_norm(const Interaction& Phi, const DecayFunction& F,
              const MetricSpace& G, double t);

// ============================================================================
// Hamiltonians
// ============================================================================

// H_Lambda(t) = sum of the terms with X inside `volume` (embedded), plus any
// optional on-site fields.
LocalOperator hamiltonian(const Interaction& Phi, const SiteSet& volume,
                          double t, const HilbertStructure& H,
                          const std::vector<InteractionTerm>& onsite = {});

// Same with every term replaced by its declared t-derivative.
LocalOperator hamiltonian_derivative(const Interaction& Phi,
                                     const SiteSet& volume, double t,
                                     const HilbertStructure& H);

// ============================================================================
// Phi-boundary, integrals, moments
// ============================================================================

struct PhiBoundary {
  SiteSet X;
  SiteSet boundary;
};

PhiBoundary phi_boundary(const Interaction& Phi, const SiteSet& X,
                         const SiteSet& volume);

// I_{t,s}(Phi) = C_F * integral of ||Phi||_F(r) dr over [min(s,t), max(s,t)],
// by adaptive Simpson (tolerance abs_tol); closed form when t-independent.
double its_integral(const Interaction& Phi, const DecayFunction& F,
                    const MetricSpace& G, double s, double t,
                    double abs_tol = 1e-9);

// Adaptive Simpson on a scalar function (exposed for reuse).
double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double abs_tol);

// Phi_p(X,t) = |X|^p Phi(X,t).
Interaction moment_interaction(const Interaction& Phi, double p);

// ============================================================================
// Appendix sum-bound audits: each entry carries both sides.
// ============================================================================

struct BoundCheck {
  std::string what;
  double lhs = 0.0, rhs = 0.0;
  bool pass() const { return lhs <= rhs + 1e-12 * (1.0 + std::abs(rhs)); }
  double slack() const { return lhs > 0 ? rhs / lhs : std::numeric_limits<double>::infinity(); }
};

// Distance sums, diameter sums, interaction moments, and weighted sums, all
// audited by brute-force enumeration of the terms of Phi at parameter t.
std::vector<BoundCheck> appendix_sum_audit(const Interaction& Phi,
                                           const DecayFunction& F,
                                           const MetricSpace& G,
                                           const SiteSet& X, double R,
                                           double p, double t, double nu,
                                           double kappa);

// ============================================================================
// Presets
// ============================================================================

// Transverse-field Ising chain: J sigma^z sigma^z on bonds, h(t) sigma^x on
// sites.
Interaction tfi_chain(int N, double J, double h);
Interaction tfi_chain_t(int N, double J, std::function<double(double)> h,
                        std::function<double(double)> dh);
// Classical Ising chain (bonds only; doubly degenerate ground space).
Interaction classical_ising_chain(int N, double J);
// XY chain: J (sigma^x sigma^x + sigma^y sigma^y) on bonds.
Interaction xy_chain(int N, double J);
// Random Hermitian terms on every set of diameter <= range (deterministic in
// the seed), with norm-1 terms scaled by `strength`.
Interaction random_local(const MetricSpace& G, double range,
                         unsigned long long seed, double strength = 1.0);

}  // namespace qlv
