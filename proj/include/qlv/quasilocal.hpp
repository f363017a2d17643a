#pragma once

// ============================================================================
// quasilocal: quasi-local maps as first-class values.  A map K carries
// declared parameters: a local bound ||K(A)|| <= B |X|^p ||A|| and a
// commutator bound ||[K(A), B]|| <= C |X|^q ||A|| ||B|| G(d(X, Y)).  The
// module provides empirical decay probing, local approximation by
// conditional expectation with its error bound, composition decay
// calculators, the transformation of an interaction through K with exact
// reconstruction, and the quasi-locality of a difference of dynamics.
// ============================================================================

#include "qlv/dynamics.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace qlv {

struct QuasiLocalParams {
  double B = 1.0, p = 0.0;  // ||K(A)|| <= B |X|^p ||A||
  double C = 0.0, q = 0.0;  // ||[K(A),B]|| <= C |X|^q ||A|| ||B|| G(d)
  DecayFunction G = DecayFunction::power(1.0);
};

class QuasiLocalMap {
 public:
  std::string name = "K";
  SiteSet volume;
  // K_t(A) for a local observable A; the result lives on `volume`.
  std::function<Mat(const LocalOperator&, double)> apply;
  QuasiLocalParams params;
  bool adjoint_compatible = true;

  Mat operator()(const LocalOperator& A, double t) const {
    return apply(A, t);
  }
};

// The identity map (declared decay: C = 2, fast exponential).
QuasiLocalMap identity_map(const SiteSet& volume, const HilbertStructure& HS);

// Heisenberg evolution tau_{t,s} as a quasi-local map.  Declared parameters
// come from the commutator bound for the weighted function e^{-a r} F0 over
// the horizon [s - T, s + T]: q = 1, G(d) = e^{-a d}, and
// C = (2 / C_{F_a}) (e^{2 I_T} - 1) ||F0||.
QuasiLocalMap heisenberg_map(const Interaction& Phi, const DecayFunction& F0,
                             double a, const MetricSpace& Gm,
                             const SiteSet& volume, const HilbertStructure& HS,
                             double s, double horizon);

// ============================================================================
// Empirical decay
// ============================================================================

struct DecayEstimate {
  std::vector<double> distances;  // strictly increasing
  std::vector<double> values;     // suffix-max accumulated, non-increasing
};

// Probe ||[K(A), B]|| / |X|^q over operator bases with ||A|| = ||B|| = 1,
// supports X up to `support_cap` sites and single-site Y, tabulated by
// d(X, Y).
DecayEstimate estimate_decay(const QuasiLocalMap& K, const MetricSpace& Gm,
                             const HilbertStructure& HS, double t,
                             int support_cap = 2);

// ============================================================================
// Local approximation (conditional expectation onto X(n))
// ============================================================================

struct LocalApprox {
  LocalOperator approx;  // Pi_{X(n)}(K(A)), embedded on the volume
  double error = 0.0;    // ||K(A) - approx||
  double bound = 0.0;    // 2 C |X|^q ||A|| G(n)
  bool pass() const { return error <= bound + 1e-12 * (1.0 + bound); }
};
LocalApprox local_approx(const QuasiLocalMap& K, const LocalOperator& A,
                         const MetricSpace& Gm, const HilbertStructure& HS,
                         int n, const ProductState& rho, double t);

// || Delta_{X(n)}(K(A)) || <= 4 C |X|^q ||A|| G(n-1) for n >= 1, plus the
// exactness of the finite telescoping sum, for n = 1 .. n_max.
std::vector<BoundCheck> shell_decay_audit(const QuasiLocalMap& K,
                                          const LocalOperator& A,
                                          const MetricSpace& Gm,
                                          const HilbertStructure& HS,
                                          const ProductState& rho, double t,
                                          int n_max);

// ============================================================================
// Composition decay calculators
// ============================================================================

enum class CompositionMode { OuterBounded, General };

// Composed declared parameters for K2 after K1.  OuterBounded treats K2 as a
// bounded map of norm B2 (p2 = 0 expected); General uses the
// conditional-expectation series and requires G1 with a finite (nu p2)-th
// moment.
QuasiLocalParams composition_bound(const QuasiLocalParams& k1,
                                   const QuasiLocalParams& k2,
                                   CompositionMode mode, double nu,
                                   double kappa);

// The conditional-expectation composition series
// sum_n K2(Delta_{X(n)}(K1(A))); at finite volume this telescopes to
// K2(K1(A)) for every product state rho.
Mat composition_series(const QuasiLocalMap& K2, const QuasiLocalMap& K1,
                       const LocalOperator& A, const MetricSpace& Gm,
                       const HilbertStructure& HS, const ProductState& rho,
                       double t);

// Max over a probe set of || series(rho_a) - series(rho_b) ||.
double rho_independence_audit(const QuasiLocalMap& K2, const QuasiLocalMap& K1,
                              const LocalOperator& A, const MetricSpace& Gm,
                              const HilbertStructure& HS,
                              const ProductState& rho_a,
                              const ProductState& rho_b, double t);

// ============================================================================
// Transformed interactions
// ============================================================================

struct TransformedInteraction {
  Interaction psi;  // Psi(Z, t), one term per support Z, cached per t
  // || sum_Z Psi(Z,t) - K_t(H_Lambda(t)) ||
  std::function<double(double)> reconstruction_residual;
};

// Psi(Z,t) = sum_{n >= 0} sum_{X term of Phi with X(n) cap Lambda = Z}
//            Delta_{X(n)}(K_t(Phi(X,t))).
TransformedInteraction transform_interaction(const QuasiLocalMap& K,
                                             const Interaction& Phi,
                                             const MetricSpace& Gm,
                                             const SiteSet& volume,
                                             const HilbertStructure& HS,
                                             const ProductState& rho);

// Decay of the transformed interaction: for every site pair (x, y),
// sum_{Z containing x,y} ||Psi(Z,t)|| <= C1 F(d/3) + C2 M^G_{nu+1}(floor(d/3))
// with C1 = B ||Phi_p||_F + 4 kappa^2 C ||Phi_q||_F M^G_{2nu+1}(0) and
// C2 = 4 kappa ||F|| C ||Phi_q||_F.
std::vector<BoundCheck> transform_decay_audit(const TransformedInteraction& TI,
                                              const Interaction& Phi,
                                              const QuasiLocalParams& kp,
                                              const DecayFunction& F,
                                              const MetricSpace& Gm, double t,
                                              double nu, double kappa);

// ============================================================================
// Difference of dynamics as a quasi-local map
// ============================================================================

struct DiffDynamicsBound {
  double its_diff = 0.0;     // I_{t,s}(Phi - Psi)
  double c1 = 0.0, c2 = 0.0;
  double volume_term = 0.0;  // C1 ||F|| |X| branch
  double decay_term = 0.0;   // C2 G(d(X,Y)) branch
  double value = 0.0;        // 4 / C_F * I * min(volume_term, decay_term)
};
DiffDynamicsBound diff_dynamics_ql_bound(const Interaction& Phi,
                                         const Interaction& Psi,
                                         const DecayFunction& F,
                                         const MetricSpace& Gm,
                                         const SiteSet& volume,
                                         const SiteSet& X, const SiteSet& Y,
                                         double s, double t, double nu,
                                         double kappa);

// Exact || [ (tau^Phi - tau^Psi)(A), B ] || against the bound above.
BoundCheck diff_dynamics_ql_audit(const Interaction& Phi,
                                  const Interaction& Psi,
                                  const DecayFunction& F,
                                  const MetricSpace& Gm, const SiteSet& volume,
                                  const HilbertStructure& HS,
                                  const LocalOperator& A,
                                  const LocalOperator& B, double s, double t,
                                  double nu, double kappa);

}  // namespace qlv
