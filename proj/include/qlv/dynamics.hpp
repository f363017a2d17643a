#pragma once

// ============================================================================
// dynamics: propagators for dU/dt = -i H(t) U on finite volumes, Heisenberg
// evolution, unitarity / cocycle diagnostics, Lieb-Robinson commutator bounds
// with exact brute-force audits, and continuity of the dynamics in the
// interaction and in the volume.
// ============================================================================

#include "qlv/interactions.hpp"

#include <functional>
#include <vector>

namespace qlv {

std::vector<double> linspace(double a, double b, int n);

class Propagator {
 public:
  enum class Method { EigConst, ExpMid, RK4, Dyson };

  std::vector<double> times;  // times[0] is the initial time s
  std::vector<Mat> U;         // U[k] = U(times[k], times[0])
  Method method = Method::RK4;
  int substeps = 64;          // per grid interval (ExpMid / RK4)
  int dyson_iterations = 12;  // Picard iterations per interval
  int dyson_subnodes = 129;   // trapezoid nodes per interval
  std::function<Mat(double)> Ht;  // generator, kept for re-integration

  // max_k || U_k^* U_k - 1 ||
  double unitarity_residual() const;

  // || U(t_j, t_0) - W U(t_i, t_0) || with W the propagator over [t_i, t_j]
  // freshly integrated by the same method (an independent consistency check,
  // not a tautology).
  double cocycle_residual(int i, int j) const;

  Mat heisenberg(int k, const Mat& A) const;   // U_k^* A U_k
  Mat schrodinger(int k, const Mat& A) const;  // U_k A U_k^*
};

// Exact propagator for a constant Hamiltonian (one eigendecomposition).
Propagator propagate_eig_const(const Mat& H, const std::vector<double>& times);
// Exponential midpoint (second-order Magnus), exact for constant H.
Propagator propagate_expmid(std::function<Mat(double)> Ht,
                            const std::vector<double>& times,
                            int substeps = 64);
// Classical RK4 with polar re-unitarization after every interval.
Propagator propagate_rk4(std::function<Mat(double)> Ht,
                         const std::vector<double>& times, int substeps = 64);
// Per-interval Picard iteration of the Dyson series (cumulative trapezoid).
Propagator propagate_dyson(std::function<Mat(double)> Ht,
                           const std::vector<double>& times,
                           int iterations = 12, int subnodes = 129);
// U(t,s) = e^{-i t H0} Utilde(t,s) e^{i s H0} with Utilde generated by the
// interaction-picture Hamiltonian e^{i t H0} (H(t) - H0) e^{-i t H0}.
Propagator propagate_interaction_picture(const Mat& H0,
                                         std::function<Mat(double)> Ht,
                                         const std::vector<double>& times,
                                         int substeps = 64);

// t -> H_Lambda(t) as a dense matrix on `volume`.
std::function<Mat(double)> hamiltonian_generator(const Interaction& Phi,
                                                 const SiteSet& volume,
                                                 const HilbertStructure& H);

// Nearest unitary (polar factor) of an almost-unitary matrix.
Mat polar_unitary(const Mat& A);

// ============================================================================
// ODE and Duhamel diagnostics
// ============================================================================

// Solve dV/dt = -i [A(t), V] + B(t) by RK4 and report the endpoint norm
// against the a-priori bound ||V(0)|| + int ||B||.
struct OdeAudit {
  double lhs = 0.0, rhs = 0.0;
  bool pass() const { return lhs <= rhs + 1e-9 * (1.0 + rhs); }
};
OdeAudit norm_preserving_ode_audit(const std::function<Mat(double)>& A,
                                   const std::function<Mat(double)>& B,
                                   const Mat& V0, double t0, double t1,
                                   int steps = 400);

// || dU_lambda(t,s) / dlambda || by central finite difference, against the
// Duhamel bound int_s^t || dH/dlambda (r) || dr.
struct DuhamelAudit {
  double fd_norm = 0.0, bound = 0.0;
  bool pass() const { return fd_norm <= bound + 1e-6 * (1.0 + bound); }
};
DuhamelAudit duhamel_audit(
    const std::function<Mat(double, double)>& H_of_lambda_t, double lambda,
    double s, double t, double fd_eps = 1e-5, int substeps = 64);

// ============================================================================
// Lieb-Robinson bounds
// ============================================================================

// Sum of F(d(x,y)) over x in X, y in Y.
double f_set_sum(const DecayFunction& F, const MetricSpace& G, const SiteSet& X,
                 const SiteSet& Y);

struct LiebRobinsonBound {
  double its = 0.0;    // I_{t,s}(Phi)
  double dxy = 0.0;    // min of the two boundary-weighted F-sums
  double value = 0.0;  // commutator bound for ||A|| = ||B|| = 1
};
LiebRobinsonBound lr_bound(const Interaction& Phi, const DecayFunction& F,
                           const MetricSpace& G, const SiteSet& volume,
                           const SiteSet& X, const SiteSet& Y, double s,
                           double t);

// Velocity form for the weighted function F_a = e^{-a r} F0: the bound
// 2 ||F0|| / C_{F_a} * min(|bd X|, |bd Y|) * exp(a (v_a |t-s| - d(X,Y))),
// with v_a = 2 C_{F_a} |||Phi|||_{F_a} / a.
struct LRVelocity {
  double a = 0.0, va = 0.0, value = 0.0;
};
LRVelocity lr_velocity_bound(const Interaction& Phi, const DecayFunction& F0,
                             double a, const MetricSpace& G,
                             const SiteSet& volume, const SiteSet& X,
                             const SiteSet& Y, double s, double t);

// Exact || [tau_{t,s}(A), B] || against the bound, at each listed time.
struct LRSample {
  double t = 0.0, exact = 0.0, bound = 0.0;
  bool pass(double tol = 1e-6) const { return exact <= bound + tol; }
};
std::vector<LRSample> lr_audit(const Interaction& Phi, const DecayFunction& F,
                               const MetricSpace& G, const SiteSet& volume,
                               const HilbertStructure& HS,
                               const LocalOperator& A, const LocalOperator& B,
                               double s, const std::vector<double>& times);

// ============================================================================
// Continuity of the dynamics
// ============================================================================

struct DifferenceAudit {
  double exact = 0.0, bound = 0.0;
  bool pass() const { return exact <= bound + 1e-12; }
  double slack() const { return exact > 0 ? bound / exact : 1e300; }
};

// || tau^Phi_{t,s}(A) - tau^Psi_{t,s}(A) || against
// (2||A||/C_F) e^{2 min(I(Phi), I(Psi))} I_{t,s}(Phi - Psi) sum_{X x Lambda} F.
DifferenceAudit interaction_difference_audit(
    const Interaction& Phi, const Interaction& Psi, const DecayFunction& F,
    const MetricSpace& G, const SiteSet& volume, const HilbertStructure& HS,
    const LocalOperator& A, double s, double t);

// Same interaction on Lambda versus on a sub-volume Lambda0 containing the
// support of A; the bound replaces the lattice sum by sum over X x
// (Lambda \ Lambda0).
DifferenceAudit volume_difference_audit(const Interaction& Phi,
                                        const DecayFunction& F,
                                        const MetricSpace& G,
                                        const SiteSet& volume,
                                        const SiteSet& subvolume,
                                        const HilbertStructure& HS,
                                        const LocalOperator& A, double s,
                                        double t);

}  // namespace qlv
