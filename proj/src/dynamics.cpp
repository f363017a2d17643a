#include "qlv/dynamics.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace qlv {

std::vector<double> linspace(double a, double b, int n) {
  if (n < 2) throw std::invalid_argument("linspace: need n >= 2");
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i)
    out[i] = a + (b - a) * static_cast<double>(i) / (n - 1);
  out.back() = b;
  return out;
}

Mat polar_unitary(const Mat& A) {
  Eigen::BDCSVD<Mat> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

namespace {

const std::complex<double> I1(0.0, 1.0);

// One RK4 step of dU/dt = -i H(t) U.
Mat rk4_step(const std::function<Mat(double)>& Ht, const Mat& U, double t,
             double h) {
  const Mat k1 = -I1 * (Ht(t) * U);
  const Mat k2 = -I1 * (Ht(t + 0.5 * h) * (U + 0.5 * h * k1));
  const Mat k3 = -I1 * (Ht(t + 0.5 * h) * (U + 0.5 * h * k2));
  const Mat k4 = -I1 * (Ht(t + h) * (U + h * k3));
  return U + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Mat expmid_segment(const std::function<Mat(double)>& Ht, double a, double b,
                   int substeps) {
  const long long d = Ht(a).rows();
  Mat U = Mat::Identity(d, d);
  const double h = (b - a) / substeps;
  for (int k = 0; k < substeps; ++k) {
    const double tm = a + (k + 0.5) * h;
    Eigen::SelfAdjointEigenSolver<Mat> es(Ht(tm));
    const Vec phase =
        (-I1 * h * es.eigenvalues().cast<cd>().array()).exp().matrix();
    U = es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint() *
        U;
  }
  return U;
}

Mat rk4_segment(const std::function<Mat(double)>& Ht, double a, double b,
                int substeps) {
  const long long d = Ht(a).rows();
  Mat U = Mat::Identity(d, d);
  const double h = (b - a) / substeps;
  for (int k = 0; k < substeps; ++k) U = rk4_step(Ht, U, a + k * h, h);
  return polar_unitary(U);
}

// Picard iteration of U(r) = 1 - i int_a^r H U on [a, b], cumulative
// trapezoid over `subnodes` equispaced nodes.
Mat dyson_segment(const std::function<Mat(double)>& Ht, double a, double b,
                  int iterations, int subnodes) {
  const long long d = Ht(a).rows();
  const auto grid = linspace(a, b, subnodes);
  std::vector<Mat> Hs(subnodes);
  for (int j = 0; j < subnodes; ++j) Hs[j] = Ht(grid[j]);
  std::vector<Mat> U(subnodes, Mat::Identity(d, d));
  std::vector<Mat> next(subnodes);
  const double h = (b - a) / (subnodes - 1);
  for (int it = 0; it < iterations; ++it) {
    Mat acc = Mat::Zero(d, d);
    next[0] = Mat::Identity(d, d);
    for (int j = 1; j < subnodes; ++j) {
      acc += (0.5 * h) * (Hs[j - 1] * U[j - 1] + Hs[j] * U[j]);
      next[j] = Mat::Identity(d, d) - I1 * acc;
    }
    std::swap(U, next);
  }
  return U.back();
}

Mat segment_propagator(Propagator::Method m,
                       const std::function<Mat(double)>& Ht, double a,
                       double b, int substeps, int iters, int subnodes) {
  switch (m) {
    case Propagator::Method::ExpMid:
      return expmid_segment(Ht, a, b, substeps);
    case Propagator::Method::RK4:
      return rk4_segment(Ht, a, b, substeps);
    case Propagator::Method::Dyson:
      return dyson_segment(Ht, a, b, iters, subnodes);
    default:
      throw std::logic_error("segment_propagator: unsupported method");
  }
}

Propagator chain_segments(Propagator::Method m, std::function<Mat(double)> Ht,
                          const std::vector<double>& times, int substeps,
                          int iters, int subnodes) {
  if (times.size() < 2)
    throw std::invalid_argument("propagate: need at least two times");
  Propagator P;
  P.method = m;
  P.times = times;
  P.substeps = substeps;
  P.dyson_iterations = iters;
  P.dyson_subnodes = subnodes;
  P.Ht = std::move(Ht);
  const long long d = P.Ht(times.front()).rows();
  P.U.reserve(times.size());
  P.U.push_back(Mat::Identity(d, d));
  for (size_t k = 1; k < times.size(); ++k)
    P.U.push_back(segment_propagator(m, P.Ht, times[k - 1], times[k], substeps,
                                     iters, subnodes) *
                  P.U.back());
  return P;
}

}  // namespace

Propagator propagate_eig_const(const Mat& H,
                               const std::vector<double>& times) {
  if (times.size() < 2)
    throw std::invalid_argument("propagate: need at least two times");
  Propagator P;
  P.method = Propagator::Method::EigConst;
  P.times = times;
  Mat Hc = H;
  P.Ht = [Hc](double) { return Hc; };
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  for (double t : times) {
    const Vec phase = (-I1 * (t - times.front()) *
                       es.eigenvalues().cast<cd>().array())
                          .exp()
                          .matrix();
    P.U.push_back(es.eigenvectors() * phase.asDiagonal() *
                  es.eigenvectors().adjoint());
  }
  return P;
}

Propagator propagate_expmid(std::function<Mat(double)> Ht,
                            const std::vector<double>& times, int substeps) {
  return chain_segments(Propagator::Method::ExpMid, std::move(Ht), times,
                        substeps, 0, 0);
}

Propagator propagate_rk4(std::function<Mat(double)> Ht,
                         const std::vector<double>& times, int substeps) {
  return chain_segments(Propagator::Method::RK4, std::move(Ht), times,
                        substeps, 0, 0);
}

Propagator propagate_dyson(std::function<Mat(double)> Ht,
                           const std::vector<double>& times, int iterations,
                           int subnodes) {
  return chain_segments(Propagator::Method::Dyson, std::move(Ht), times, 64,
                        iterations, subnodes);
}

Propagator propagate_interaction_picture(const Mat& H0,
                                         std::function<Mat(double)> Ht,
                                         const std::vector<double>& times,
                                         int substeps) {
  Eigen::SelfAdjointEigenSolver<Mat> es(H0);
  const Mat V = es.eigenvectors();
  const Eigen::VectorXd ev = es.eigenvalues();
  auto rotate = [V, ev](double t) {
    const Vec phase = (Vec::Scalar(0, 1) * t * ev.cast<cd>().array())
                          .exp()
                          .matrix();  // e^{+i t H0}
    return Mat(V * phase.asDiagonal() * V.adjoint());
  };
  auto Htilde = [rotate, Ht, H0](double t) {
    const Mat R = rotate(t);
    return Mat(R * (Ht(t) - H0) * R.adjoint());
  };
  Propagator P = propagate_expmid(Htilde, times, substeps);
  const double s = times.front();
  const Mat Es = rotate(s);  // e^{+i s H0}
  for (size_t k = 0; k < P.times.size(); ++k) {
    const Mat Et = rotate(P.times[k]);  // e^{+i t H0}
    P.U[k] = Et.adjoint() * P.U[k] * Es;
  }
  P.Ht = std::move(Ht);
  P.method = Propagator::Method::ExpMid;
  return P;
}

std::function<Mat(double)> hamiltonian_generator(const Interaction& Phi,
                                                 const SiteSet& volume,
                                                 const HilbertStructure& H) {
  if (Phi.time_dependent) {
    Interaction copy = Phi;
    SiteSet vol = volume;
    HilbertStructure hs = H;
    return [copy, vol, hs](double t) {
      return hamiltonian(copy, vol, t, hs).matrix;
    };
  }
  const Mat Hm = hamiltonian(Phi, volume, Phi.t0, H).matrix;
  return [Hm](double) { return Hm; };
}

double Propagator::unitarity_residual() const {
  double worst = 0.0;
  for (const Mat& u : U) {
    const Mat r = u.adjoint() * u - Mat::Identity(u.rows(), u.cols());
    worst = std::max(worst, opnorm(r));
  }
  return worst;
}

double Propagator::cocycle_residual(int i, int j) const {
  if (i < 0 || j <= i || j >= static_cast<int>(times.size()))
    throw std::invalid_argument("cocycle_residual: bad indices");
  Mat W;
  if (method == Method::EigConst) {
    Eigen::SelfAdjointEigenSolver<Mat> es(Ht(times[i]));
    const Vec phase = (-I1 * (times[j] - times[i]) *
                       es.eigenvalues().cast<cd>().array())
                          .exp()
                          .matrix();
    W = es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
  } else {
    // re-integrate [t_i, t_j] in one pass over the intermediate grid
    W = Mat::Identity(U[0].rows(), U[0].cols());
    for (int k = i; k < j; ++k)
      W = segment_propagator(method, Ht, times[k], times[k + 1], substeps,
                             dyson_iterations, dyson_subnodes) *
          W;
  }
  return opnorm(Mat(U[j] - W * U[i]));
}

Mat Propagator::heisenberg(int k, const Mat& A) const {
  return U[k].adjoint() * A * U[k];
}

Mat Propagator::schrodinger(int k, const Mat& A) const {
  return U[k] * A * U[k].adjoint();
}

// ============================================================================
// ODE and Duhamel diagnostics
// ============================================================================

OdeAudit norm_preserving_ode_audit(const std::function<Mat(double)>& A,
                                   const std::function<Mat(double)>& B,
                                   const Mat& V0, double t0, double t1,
                                   int steps) {
  const double h = (t1 - t0) / steps;
  auto rhs = [&](double t, const Mat& V) {
    return Mat(-I1 * (A(t) * V - V * A(t)) + B(t));
  };
  Mat V = V0;
  double bint = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double t = t0 + k * h;
    const Mat k1 = rhs(t, V);
    const Mat k2 = rhs(t + 0.5 * h, V + 0.5 * h * k1);
    const Mat k3 = rhs(t + 0.5 * h, V + 0.5 * h * k2);
    const Mat k4 = rhs(t + h, V + h * k3);
    V += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    bint += (h / 2.0) * (opnorm(B(t)) + opnorm(B(t + h)));
  }
  OdeAudit out;
  out.lhs = opnorm(V);
  out.rhs = opnorm(V0) + bint;
  return out;
}

DuhamelAudit duhamel_audit(
    const std::function<Mat(double, double)>& H_of_lambda_t, double lambda,
    double s, double t, double fd_eps, int substeps) {
  auto at = [&](double lam) {
    auto Ht = [&, lam](double r) { return H_of_lambda_t(lam, r); };
    return expmid_segment(Ht, s, t, substeps);
  };
  const Mat Up = at(lambda + fd_eps);
  const Mat Um = at(lambda - fd_eps);
  DuhamelAudit out;
  out.fd_norm = opnorm(Mat((Up - Um) / (2.0 * fd_eps)));
  auto dnorm = [&](double r) {
    const Mat dH = (H_of_lambda_t(lambda + fd_eps, r) -
                    H_of_lambda_t(lambda - fd_eps, r)) /
                   (2.0 * fd_eps);
    return opnorm(dH);
  };
  out.bound = adaptive_simpson(dnorm, s, t, 1e-8);
  return out;
}

// ============================================================================
// Lieb-Robinson bounds
// ============================================================================

double f_set_sum(const DecayFunction& F, const MetricSpace& G, const SiteSet& X,
                 const SiteSet& Y) {
  double s = 0.0;
  for (int x : X)
    for (int y : Y) s += F(G.dist(x, y));
  return s;
}

LiebRobinsonBound lr_bound(const Interaction& Phi, const DecayFunction& F,
                           const MetricSpace& G, const SiteSet& volume,
                           const SiteSet& X, const SiteSet& Y, double s,
                           double t) {
  LiebRobinsonBound out;
  out.its = its_integral(Phi, F, G, s, t);
  const SiteSet bx = phi_boundary(Phi, X, volume).boundary;
  const SiteSet by = phi_boundary(Phi, Y, volume).boundary;
  out.dxy = std::min(f_set_sum(F, G, X, by), f_set_sum(F, G, bx, Y));
  const double cf = f_constants(F, G).conv_constant;
  out.value = (2.0 / cf) * std::expm1(2.0 * out.its) * out.dxy;
  return out;
}

LRVelocity lr_velocity_bound(const Interaction& Phi, const DecayFunction& F0,
                             double a, const MetricSpace& G,
                             const SiteSet& volume, const SiteSet& X,
                             const SiteSet& Y, double s, double t) {
  if (a <= 0.0) throw std::invalid_argument("lr_velocity_bound: a <= 0");
  const DecayFunction Fa = weighted_f(F0, Weight::power(a, 1.0));
  const FConstants k0 = f_constants(F0, G);
  const FConstants ka = f_constants(Fa, G);
  double sup_norm = 0.0;
  for (double r : linspace(std::min(s, t), std::max(s, t), 21))
    sup_norm = std::max(sup_norm, f_norm(Phi, Fa, G, r));
  LRVelocity out;
  out.a = a;
  out.va = 2.0 * ka.conv_constant * sup_norm / a;
  const SiteSet bx = phi_boundary(Phi, X, volume).boundary;
  const SiteSet by = phi_boundary(Phi, Y, volume).boundary;
  const double nbd = std::min(bx.size(), by.size());
  out.value = 2.0 * k0.uniform_norm / ka.conv_constant * nbd *
              std::exp(a * (out.va * std::abs(t - s) - G.dist_sets(X, Y)));
  return out;
}

namespace {

// Certified spectral norm of the commutator [A(t), B] for a constant
// Hamiltonian, working entirely in the eigenbasis: the Heisenberg evolution
// is the entrywise phase A(t) = D At D^dag with D = diag(e^{i E_j dt}), and
// i[A(t), B] is Hermitian, so its extreme eigenvalue is obtained by a Lanczos
// iteration with full reorthogonalization using only matrix-vector products.
// The returned value theta carries a residual certificate:
// | ||C|| - |theta| | <= ||M v - theta v||, driven below 1e-11 * |theta|.
double comm_norm_eigbasis(const Mat& At, const Mat& Bt,
                          const Eigen::VectorXd& E, double dt) {
  const Eigen::Index n = At.rows();
  Vec phase(n);
  for (Eigen::Index j = 0; j < n; ++j)
    phase(j) = std::exp(I1 * E(j) * dt);
  // A(t) x = D (At (D^dag x)); M x = i (A(t) (Bt x) - Bt (A(t) x)).
  const auto apply_At = [&](const Vec& x) -> Vec {
    return phase.asDiagonal() * (At * (phase.conjugate().asDiagonal() * x));
  };
  const auto apply_M = [&](const Vec& x) -> Vec {
    return I1 * (apply_At(Bt * x) - Bt * apply_At(x));
  };

  // Deterministic start vector (fixed linear congruential stream).
  Vec v(n);
  std::uint64_t state = 0x9e3779b97f4a7c15ULL;
  for (Eigen::Index j = 0; j < n; ++j) {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    const double re = static_cast<double>(state >> 11) * 0x1.0p-53 - 0.5;
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    const double im = static_cast<double>(state >> 11) * 0x1.0p-53 - 0.5;
    v(j) = cd(re, im);
  }
  v.normalize();

  const int m_max = std::min<Eigen::Index>(n, 400);
  std::vector<Vec> basis;
  basis.reserve(m_max);
  std::vector<double> alpha, beta;  // tridiagonal coefficients
  basis.push_back(v);
  double theta = 0.0;
  for (int m = 0; m < m_max; ++m) {
    Vec w = apply_M(basis.back());
    const double a = std::real(basis.back().dot(w));
    alpha.push_back(a);
    w -= a * basis.back();
    if (m > 0) w -= beta.back() * basis[m - 1];
    // Full reorthogonalization keeps the certificate honest.
    for (const Vec& q : basis) w -= q.dot(w) * q;
    const double b = w.norm();

    // Extreme Ritz value and its residual bound |b * y_last|.
    const int mm = m + 1;
    Eigen::MatrixXd Tm = Eigen::MatrixXd::Zero(mm, mm);
    for (int i = 0; i < mm; ++i) {
      Tm(i, i) = alpha[static_cast<size_t>(i)];
      if (i + 1 < mm)
        Tm(i, i + 1) = Tm(i + 1, i) = beta[static_cast<size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Tm);
    Eigen::Index idx = 0;
    es.eigenvalues().cwiseAbs().maxCoeff(&idx);
    theta = std::abs(es.eigenvalues()(idx));
    const double resid = b * std::abs(es.eigenvectors()(mm - 1, idx));
    if (b <= 1e-14 || resid <= 1e-11 * std::max(theta, 1e-30)) break;
    if (mm == m_max) break;
    beta.push_back(b);
    basis.push_back(w / b);
  }
  return theta;
}

}  // namespace

std::vector<LRSample> lr_audit(const Interaction& Phi, const DecayFunction& F,
                               const MetricSpace& G, const SiteSet& volume,
                               const HilbertStructure& HS,
                               const LocalOperator& A, const LocalOperator& B,
                               double s, const std::vector<double>& times) {
  // The embedding X -> X (x) 1 is isometric, so the norms of the local
  // matrices are the norms of the embedded observables.
  const double na = opnorm(A.matrix), nb = opnorm(B.matrix);

  std::vector<LRSample> out;
  if (!Phi.time_dependent) {
    // Constant generator: evolve by entrywise phases in the eigenbasis and
    // evaluate each commutator norm matrix-free (no dense products per node).
    const Mat Afull = embed(A, volume, HS).matrix;
    const Mat Bfull = embed(B, volume, HS).matrix;
    const Mat H = hamiltonian(Phi, volume, s, HS).matrix;
    Eigen::SelfAdjointEigenSolver<Mat> es(H);
    const Mat& Vb = es.eigenvectors();
    const Mat At = Vb.adjoint() * Afull * Vb;
    const Mat Bt = Vb.adjoint() * Bfull * Vb;
    for (double t : times) {
      LRSample sm;
      sm.t = t;
      sm.exact = comm_norm_eigbasis(At, Bt, es.eigenvalues(), t - s);
      sm.bound =
          na * nb *
          lr_bound(Phi, F, G, volume, A.support, B.support, s, t).value;
      out.push_back(sm);
    }
    return out;
  }

  const Mat Afull = embed(A, volume, HS).matrix;
  const Mat Bfull = embed(B, volume, HS).matrix;
  std::vector<double> grid = times;
  if (grid.empty() || grid.front() != s) grid.insert(grid.begin(), s);
  const Propagator P =
      propagate_expmid(hamiltonian_generator(Phi, volume, HS), grid, 32);

  for (size_t k = (grid.size() == times.size() ? 0 : 1); k < grid.size();
       ++k) {
    LRSample sm;
    sm.t = grid[k];
    sm.exact = opnorm(commutator(P.heisenberg(static_cast<int>(k), Afull),
                                 Bfull));
    sm.bound =
        na * nb * lr_bound(Phi, F, G, volume, A.support, B.support, s, grid[k])
                      .value;
    out.push_back(sm);
  }
  return out;
}

// ============================================================================
// Continuity of the dynamics
// ============================================================================

namespace {

Mat heisenberg_endpoint(const Interaction& Phi, const SiteSet& volume,
                        const HilbertStructure& HS, const Mat& A, double s,
                        double t) {
  if (!Phi.time_dependent) {
    const Mat H = hamiltonian(Phi, volume, s, HS).matrix;
    Eigen::SelfAdjointEigenSolver<Mat> es(H);
    const Vec phase =
        (-I1 * (t - s) * es.eigenvalues().cast<cd>().array()).exp().matrix();
    const Mat U =
        es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
    return U.adjoint() * A * U;
  }
  const Mat U = expmid_segment(hamiltonian_generator(Phi, volume, HS), s, t,
                               256);
  return U.adjoint() * A * U;
}

}  // namespace

DifferenceAudit interaction_difference_audit(
    const Interaction& Phi, const Interaction& Psi, const DecayFunction& F,
    const MetricSpace& G, const SiteSet& volume, const HilbertStructure& HS,
    const LocalOperator& A, double s, double t) {
  const Mat Afull = embed(A, volume, HS).matrix;
  DifferenceAudit out;
  out.exact = opnorm(Mat(heisenberg_endpoint(Phi, volume, HS, Afull, s, t) -
                         heisenberg_endpoint(Psi, volume, HS, Afull, s, t)));
  const double cf = f_constants(F, G).conv_constant;
  const double iP = its_integral(Phi, F, G, s, t);
  const double iQ = its_integral(Psi, F, G, s, t);
  const Interaction diff = linear_combination(1.0, Phi, -1.0, Psi);
  const double idiff = its_integral(diff, F, G, s, t);
  out.bound = (2.0 * opnorm(Afull) / cf) * std::exp(2.0 * std::min(iP, iQ)) *
              idiff * f_set_sum(F, G, A.support, volume);
  return out;
}

DifferenceAudit volume_difference_audit(const Interaction& Phi,
                                        const DecayFunction& F,
                                        const MetricSpace& G,
                                        const SiteSet& volume,
                                        const SiteSet& subvolume,
                                        const HilbertStructure& HS,
                                        const LocalOperator& A, double s,
                                        double t) {
  if (!is_subset(subvolume, volume))
    throw std::domain_error("volume_difference_audit: not a sub-volume");
  if (!is_subset(A.support, subvolume))
    throw std::domain_error("volume_difference_audit: A outside sub-volume");
  const Mat Afull = embed(A, volume, HS).matrix;
  // evolve on the sub-volume, then embed the result into the full volume
  const Mat Asub = embed(A, subvolume, HS).matrix;
  const Mat evolved_sub =
      heisenberg_endpoint(Phi, subvolume, HS, Asub, s, t);
  const Mat evolved_sub_full =
      embed({subvolume, evolved_sub}, volume, HS).matrix;
  DifferenceAudit out;
  out.exact = opnorm(Mat(heisenberg_endpoint(Phi, volume, HS, Afull, s, t) -
                         evolved_sub_full));
  const double cf = f_constants(F, G).conv_constant;
  const double iP = its_integral(Phi, F, G, s, t);
  out.bound = (2.0 * opnorm(Afull) / cf) * std::exp(2.0 * iP) * iP *
              f_set_sum(F, G, A.support, set_difference(volume, subvolume));
  return out;
}

}  // namespace qlv
