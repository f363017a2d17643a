#pragma once

// ============================================================================
// spectralflow: weighted integral operators F and G computed in the eigenbasis
// of a Hermitian generator (double-operator-integral route), the Hastings
// generator D(s) = int tau_t^{(s)}(H'(s)) W_gamma(t) dt, the spectral-flow
// unitary with projector-transport verification, the Hastings interaction,
// closed-form flow quasi-locality envelopes, gapped-curve audits, and
// automorphic equivalence at exact-diagonalization scale.
// ============================================================================

#include "qlv/quasilocal.hpp"
#include "qlv/weightfn.hpp"

#include <vector>

namespace qlv {

enum class WiMode { F, G };

// Weighted integral operator for one Hermitian H:
//   F(A) = int tau_t(A) w_gamma(t) dt,   [F(A)]_ij = m_F(E_i - E_j) A_ij
//   G(A) = int tau_t(A) W_gamma(t) dt,   [G(A)]_ij = i S(E_i - E_j) A_ij
// with m_F(k) = 2 int_0^T cos(kt) w_gamma(t) dt and
// S(k) = 2 int_0^T sin(kt) W_gamma(t) dt, both by Filon quadrature (step
// quad_step, cutoff T), so refinement of (T, quad_step) genuinely shrinks
// every residual.  Defaults: T = 8000/gamma, quad_step = 0.0625/gamma.
struct WeightedIntegralOperator {
  double gamma = 1.0;
  WiMode mode = WiMode::F;
  double T = 0.0, quad_step = 0.0;
  Eigen::VectorXd evals;
  Mat V;                 // eigenvectors of H (columns)
  Eigen::MatrixXd mult;  // m_F(E_i - E_j) resp. S(E_i - E_j)

  Mat apply(const Mat& A) const;
};

WeightedIntegralOperator make_weighted_integral(const Mat& H, double gamma,
                                                WiMode mode, double T = -1.0,
                                                double quad_step = -1.0);

Mat weighted_integral(const Mat& A, const Mat& H, double gamma, WiMode mode,
                      double T = -1.0, double quad_step = -1.0);

// ============================================================================
// Gapped-curve audits
// ============================================================================

// One (volume, s) spectral inspection: the ground cluster is the maximal
// low-energy prefix whose internal gaps are all below `window`; the curve is
// gapped at this point when the gap to the rest is >= window.
struct GapPoint {
  SiteSet volume;
  double s = 0.0;
  double ground_energy = 0.0;
  double cluster_top = 0.0;    // top of the ground cluster (interval I(s))
  double cluster_width = 0.0;  // delta_n
  double gap = 0.0;            // mu(s) = d(I(s), rest of the spectrum)
  int cluster_size = 0;
  bool gapped = false;
};

struct GapProfile {
  double window = 0.0;
  std::vector<GapPoint> points;
  double gamma_prime = 0.0;  // inf over points of the gap (0 if none gapped)
  bool gapped = false;       // every point gapped
};

GapProfile gap_audit(const Interaction& Phi,
                     const std::vector<SiteSet>& volumes,
                     const std::vector<double>& s_grid, double window);

// Ground-cluster projector of one Hermitian H under the same policy; also
// reports the cluster data.  Not-gapped is reported, never thrown.
GapPoint ground_cluster(const Mat& H, double window);
Mat ground_projector(const Mat& H, double window);

// ============================================================================
// Inverse-Liouvillean identities
// ============================================================================

struct LiouvilleResiduals {
  double comm_F_P = 0.0;         // ||[F(A), P]||
  double inverse_identity = 0.0; // ||i[H, G(A)] - (F(A) - A)||
  double offdiag_inverse = 0.0;  // ||-i[H, G(A_od)] - A_od||, A_od = PA(1-P)+(1-P)AP
  double offdiag_F = 0.0;        // ||F(A_od)||
};

// Requires the spectral gap across the P / (1-P) split to be >= gamma.
LiouvilleResiduals inverse_liouvillean_audit(const Mat& A, const Mat& H,
                                             double gamma, const Mat& P,
                                             double T = -1.0,
                                             double quad_step = -1.0);

// ============================================================================
// Hastings generator and the spectral flow
// ============================================================================

// D(s) = int tau_t^{(s)}(H'_Lambda(s)) W_gamma(t) dt, Hermitian.
Mat hastings_generator(const Interaction& Phi, const SiteSet& volume,
                       const HilbertStructure& HS, double s, double gamma,
                       double T = -1.0, double quad_step = -1.0);

struct FlowResult {
  std::vector<double> s;  // grid, starting at s.front()
  std::vector<Mat> U;     // solution of dU/ds = i D(s) U, U(s0) = 1
  double gamma = 0.0, T = 0.0, quad_step = 0.0, ode_step = 0.0;
  double max_unitarity_residual = 0.0;

  // alpha_s(A) = U(s)^* A U(s); transports P(s) back to P(s0).
  Mat alpha(std::size_t k, const Mat& A) const;
};

// rk4 in s with polar re-unitarization per step; the generator is evaluated
// exactly at the rk4 stage points (memoized per s value).
FlowResult flow(const Interaction& Phi, const SiteSet& volume,
                const HilbertStructure& HS, double gamma,
                const std::vector<double>& s_grid, double ode_step,
                double T = -1.0, double quad_step = -1.0);

// ||alpha_s(P(s)) - P(s0)|| along the grid, with an empirical error budget:
// weight-tail term + rk4 step-doubling term + quadrature-refinement term.
struct TransportAudit {
  std::vector<double> s;
  std::vector<double> residual;
  double max_residual = 0.0;
  double tail_term = 0.0;
  double ode_term = 0.0;
  double quad_term = 0.0;
  double budget() const { return tail_term + ode_term + quad_term + 1e-12; }
};

TransportAudit projector_transport_audit(const Interaction& Phi,
                                         const SiteSet& volume,
                                         const HilbertStructure& HS,
                                         double gamma,
                                         const std::vector<double>& s_grid,
                                         double ode_step, double window,
                                         double T = -1.0,
                                         double quad_step = -1.0);

// ============================================================================
// Hastings interaction: the local-term rewriting of D(s)
// ============================================================================

// Shell decomposition of K_s = G-mode weighted integral w.r.t. H(s) applied to
// the derivative interaction Phi'(X, s); sum_Z Psi(Z, s) = D(s) exactly at
// finite volume, for every product state rho.
TransformedInteraction hastings_interaction(const Interaction& Phi,
                                            const MetricSpace& Gm,
                                            const SiteSet& volume,
                                            const HilbertStructure& HS,
                                            double gamma,
                                            const ProductState& rho,
                                            double T = -1.0,
                                            double quad_step = -1.0);

// ============================================================================
// Flow quasi-locality envelopes
// ============================================================================

// From a Lieb-Robinson input ||[tau_t(A), B]|| <= C ||A|| ||B|| |X|
// e^{v|t| - g(d)}, the commutator envelope of the weighted integral:
//   mode F: G_F^eps(d) = 1 on [0, d*], else
//           min{1, c (C gamma / v + (27/7) e^4 f^2) e^{-eta f}}
//   mode G: G_G^eps(d) = ||W_gamma||_1 on [0, d*], else
//           min{||W_gamma||_1, (C/(2v) + (243/(49 gamma eta)) c e^4 f^3) e^{-eta f}}
// with f = f_{gamma_eps}(g(d)), gamma_eps = (1 - eps) gamma / v, and d* the
// smallest d with ln(gamma_eps g(d)) >= max(9, sqrt(eta gamma_eps / eps)).
// The overall commutator bound is ||[K(A), B]|| <= 2 ||A|| ||B|| |X| G(d).
// A logarithmic g yields an envelope with no finite moments (flagged in the
// label, not an error).
DecayFunction flow_ql_bound(double C, double v, const Weight& g, double gamma,
                            double epsilon, WiMode mode);

// The d* threshold alone (exposed for plateau tests).
double flow_ql_threshold(double v, const Weight& g, double gamma,
                         double epsilon);

// ============================================================================
// Automorphic equivalence
// ============================================================================

struct EquivalenceReport {
  std::vector<double> s;            // grid
  Eigen::MatrixXd residuals;        // (k,l): ||alpha_{s_k -> s_l}(P(s_k)) - P(s_l)||
  double max_residual = 0.0;
  bool one_dimensional = false;     // all ground clusters of size 1
  std::vector<double> fidelity;     // |<psi0(s_k)| U(s_k) |psi0(s0)>| when 1-d
  double min_fidelity = 0.0;
};

// Requires the curve to be gapped (per ground_cluster with window = 2 gamma)
// at every grid point; throws otherwise.
EquivalenceReport automorphic_equivalence_audit(const Interaction& Phi,
                                                const SiteSet& volume,
                                                const HilbertStructure& HS,
                                                double gamma,
                                                const std::vector<double>& s_grid,
                                                double ode_step,
                                                double T = -1.0,
                                                double quad_step = -1.0);

}  // namespace qlv
