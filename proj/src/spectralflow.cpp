#include "qlv/spectralflow.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace qlv {

namespace {

// ---------------------------------------------------------------------------
// Shared Fourier probes per (gamma, T, quad_step); building the weight samples
// is the expensive part and is identical across all operators with the same
// quadrature parameters.
// ---------------------------------------------------------------------------

const FourierProbes& shared_probes(double gamma, double T, double h) {
  static std::map<std::tuple<double, double, double>, FourierProbes> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  const auto key = std::make_tuple(gamma, T, h);
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache.emplace(key, make_fourier_probes(gamma, T, h)).first;
  }
  return it->second;
}

void resolve_defaults(double gamma, double* T, double* h) {
  if (*T <= 0.0) *T = 8000.0 / gamma;
  if (*h <= 0.0) *h = 0.0625 / gamma;
}

// Multiplier matrix m(E_i - E_j) in parallel over rows, using the parity of
// the scalar integrals (m_F even, S odd) to compute each pair once.
Eigen::MatrixXd multiplier_matrix(const Eigen::VectorXd& E,
                                  const FourierProbes& P, WiMode mode) {
  const Eigen::Index n = E.size();
  Eigen::MatrixXd M(n, n);
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned nthreads = std::min<unsigned>(8, hw);
  std::vector<std::thread> workers;
  std::atomic<Eigen::Index> next{0};
  auto work = [&]() {
    while (true) {
      const Eigen::Index i = next.fetch_add(1);
      if (i >= n) break;
      for (Eigen::Index j = i; j < n; ++j) {
        const double k = E(i) - E(j);
        if (mode == WiMode::F) {
          const double v = P.m_F(k);
          M(i, j) = v;
          M(j, i) = v;  // even
        } else {
          const double v = P.S(k);
          M(i, j) = v;
          M(j, i) = -v;  // odd
        }
      }
    }
  };
  for (unsigned w = 0; w < nthreads; ++w) workers.emplace_back(work);
  for (auto& w : workers) w.join();
  return M;
}

double gap_across(const Eigen::VectorXd& E, const std::vector<bool>& in_block) {
  double g = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < E.size(); ++i) {
    for (Eigen::Index j = 0; j < E.size(); ++j) {
      if (in_block[static_cast<std::size_t>(i)] &&
          !in_block[static_cast<std::size_t>(j)]) {
        g = std::min(g, std::abs(E(i) - E(j)));
      }
    }
  }
  return g;
}

Interaction derivative_interaction(const Interaction& Phi) {
  if (!Phi.c1) {
    throw std::invalid_argument(
        "derivative_interaction: interaction does not declare a derivative");
  }
  Interaction D;
  D.name = Phi.name + "_prime";
  D.t0 = Phi.t0;
  D.t1 = Phi.t1;
  D.time_dependent = true;
  for (const InteractionTerm& term : Phi.terms) {
    InteractionTerm d;
    d.X = term.X;
    d.op = term.dop;
    const Eigen::Index dim = term.op(Phi.t0).rows();
    d.dop = [dim](double) { return Mat::Zero(dim, dim); };
    D.terms.push_back(std::move(d));
  }
  return D;
}

}  // namespace

// ---------------------------------------------------------------------------
// Weighted integral operators
// ---------------------------------------------------------------------------

Mat WeightedIntegralOperator::apply(const Mat& A) const {
  const Mat At = V.adjoint() * A * V;
  Mat X(At.rows(), At.cols());
  if (mode == WiMode::F) {
    X = mult.cast<cd>().cwiseProduct(At);
  } else {
    X = (cd(0.0, 1.0) * mult.cast<cd>()).cwiseProduct(At);
  }
  return V * X * V.adjoint();
}

WeightedIntegralOperator make_weighted_integral(const Mat& H, double gamma,
                                                WiMode mode, double T,
                                                double quad_step) {
  if (gamma <= 0.0) {
    throw std::invalid_argument("make_weighted_integral: gamma must be positive");
  }
  if (!is_hermitian(H, 1e-10)) {
    throw std::invalid_argument("make_weighted_integral: H must be Hermitian");
  }
  resolve_defaults(gamma, &T, &quad_step);
  WeightedIntegralOperator W;
  W.gamma = gamma;
  W.mode = mode;
  W.T = T;
  W.quad_step = quad_step;
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  W.evals = es.eigenvalues();
  W.V = es.eigenvectors();
  const FourierProbes& P = shared_probes(gamma, T, quad_step);
  W.mult = multiplier_matrix(W.evals, P, mode);
  return W;
}

Mat weighted_integral(const Mat& A, const Mat& H, double gamma, WiMode mode,
                      double T, double quad_step) {
  return make_weighted_integral(H, gamma, mode, T, quad_step).apply(A);
}

// ---------------------------------------------------------------------------
// Gapped-curve audits
// ---------------------------------------------------------------------------

GapPoint ground_cluster(const Mat& H, double window) {
  if (window <= 0.0) throw std::invalid_argument("ground_cluster: window must be positive");
  Eigen::SelfAdjointEigenSolver<Mat> es(H, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd E = es.eigenvalues();
  GapPoint p;
  p.ground_energy = E(0);
  Eigen::Index k = 0;  // last index inside the cluster
  while (k + 1 < E.size() && E(k + 1) - E(k) < window) ++k;
  p.cluster_size = static_cast<int>(k + 1);
  p.cluster_top = E(k);
  p.cluster_width = E(k) - E(0);
  if (k + 1 < E.size()) {
    p.gap = E(k + 1) - E(k);
    p.gapped = p.gap >= window;
  } else {
    p.gap = 0.0;       // the "cluster" swallowed the whole spectrum
    p.gapped = false;  // not-gapped verdict, never an exception
  }
  return p;
}

Mat ground_projector(const Mat& H, double window) {
  const GapPoint p = ground_cluster(H, window);
  if (!p.gapped) throw std::runtime_error("ground_projector: spectrum is not gapped");
  return spectral_projection(H, p.ground_energy - 1.0, p.cluster_top + 0.5 * p.gap);
}

GapProfile gap_audit(const Interaction& Phi,
                     const std::vector<SiteSet>& volumes,
                     const std::vector<double>& s_grid, double window) {
  GapProfile prof;
  prof.window = window;
  prof.gapped = true;
  prof.gamma_prime = std::numeric_limits<double>::infinity();
  for (const SiteSet& vol : volumes) {
    HilbertStructure HS(vol);
    for (double s : s_grid) {
      const Mat H = hamiltonian(Phi, vol, s, HS).matrix;
      GapPoint p = ground_cluster(H, window);
      p.volume = vol;
      p.s = s;
      prof.gapped = prof.gapped && p.gapped;
      if (p.gapped) prof.gamma_prime = std::min(prof.gamma_prime, p.gap);
      prof.points.push_back(std::move(p));
    }
  }
  if (!std::isfinite(prof.gamma_prime)) prof.gamma_prime = 0.0;
  if (!prof.gapped) prof.gamma_prime = 0.0;
  return prof;
}

// ---------------------------------------------------------------------------
// Inverse-Liouvillean identities
// ---------------------------------------------------------------------------

LiouvilleResiduals inverse_liouvillean_audit(const Mat& A, const Mat& H,
                                             double gamma, const Mat& P,
                                             double T, double quad_step) {
  const WeightedIntegralOperator F =
      make_weighted_integral(H, gamma, WiMode::F, T, quad_step);
  const WeightedIntegralOperator G =
      make_weighted_integral(H, gamma, WiMode::G, T, quad_step);

  // Precondition: spectral gap across the P / (1-P) split at least gamma.
  const Mat Pt = F.V.adjoint() * P * F.V;
  std::vector<bool> in_block(static_cast<std::size_t>(F.evals.size()));
  for (Eigen::Index i = 0; i < F.evals.size(); ++i) {
    const double d = Pt(i, i).real();
    if (d > 0.01 && d < 0.99) {
      throw std::invalid_argument(
          "inverse_liouvillean_audit: P is not a spectral projection of H");
    }
    in_block[static_cast<std::size_t>(i)] = d >= 0.99;
  }
  if (gap_across(F.evals, in_block) < gamma - 1e-12) {
    throw std::invalid_argument(
        "inverse_liouvillean_audit: spectral gap across P is below gamma");
  }

  LiouvilleResiduals R;
  const Mat FA = F.apply(A);
  const Mat GA = G.apply(A);
  R.comm_F_P = opnorm(commutator(FA, P));
  const cd I(0.0, 1.0);
  R.inverse_identity = opnorm((I * commutator(H, GA) - (FA - A)).eval());
  const Mat Q = Mat::Identity(P.rows(), P.cols()) - P;
  const Mat Aod = P * A * Q + Q * A * P;
  const Mat GAod = G.apply(Aod);
  R.offdiag_inverse = opnorm((-I * commutator(H, GAod) - Aod).eval());
  R.offdiag_F = opnorm(F.apply(Aod));
  return R;
}

// ---------------------------------------------------------------------------
// Hastings generator and the flow
// ---------------------------------------------------------------------------

Mat hastings_generator(const Interaction& Phi, const SiteSet& volume,
                       const HilbertStructure& HS, double s, double gamma,
                       double T, double quad_step) {
  const Mat H = hamiltonian(Phi, volume, s, HS).matrix;
  const Mat Hp = hamiltonian_derivative(Phi, volume, s, HS).matrix;
  const Mat D = weighted_integral(Hp, H, gamma, WiMode::G, T, quad_step);
  return 0.5 * (D + D.adjoint().eval());  // Hermitian up to quadrature noise
}

Mat FlowResult::alpha(std::size_t k, const Mat& A) const {
  return U[k].adjoint() * A * U[k];
}

FlowResult flow(const Interaction& Phi, const SiteSet& volume,
                const HilbertStructure& HS, double gamma,
                const std::vector<double>& s_grid, double ode_step,
                double T, double quad_step) {
  if (s_grid.empty()) throw std::invalid_argument("flow: empty s grid");
  if (ode_step <= 0.0) throw std::invalid_argument("flow: ode_step must be positive");
  FlowResult R;
  R.s = s_grid;
  R.gamma = gamma;
  resolve_defaults(gamma, &T, &quad_step);
  R.T = T;
  R.quad_step = quad_step;
  R.ode_step = ode_step;

  std::map<double, Mat> Dcache;
  auto D_at = [&](double s) -> const Mat& {
    auto it = Dcache.find(s);
    if (it == Dcache.end()) {
      it = Dcache
               .emplace(s, hastings_generator(Phi, volume, HS, s, gamma, T,
                                              quad_step))
               .first;
    }
    return it->second;
  };

  const Eigen::Index dim = HS.dim(volume);
  Mat U = Mat::Identity(dim, dim);
  R.U.push_back(U);
  // In the eigenbasis of H(s), [D, P]_{ji} = i H'_{ji} / (E_j - E_i) for j
  // outside and i inside the ground block, while first-order perturbation
  // theory gives P'_{ji} = -H'_{ji} / (E_j - E_i); hence P' = i [D, P] and
  // U' = +i D U makes U^* P(s) U constant along the curve.
  const cd mi(0.0, 1.0);
  for (std::size_t k = 0; k + 1 < s_grid.size(); ++k) {
    const double sa = s_grid[k], sb = s_grid[k + 1];
    const int nsub = std::max(1, static_cast<int>(std::ceil((sb - sa) / ode_step - 1e-12)));
    const double h = (sb - sa) / nsub;
    for (int j = 0; j < nsub; ++j) {
      const double s0 = sa + j * h;
      const double sm = sa + (j + 0.5) * h;
      const double s1 = sa + (j + 1.0) * h;
      const Mat& D0 = D_at(s0);
      const Mat& Dm = D_at(sm);
      const Mat& D1 = D_at(s1);
      const Mat k1 = mi * (D0 * U);
      const Mat k2 = mi * (Dm * (U + 0.5 * h * k1));
      const Mat k3 = mi * (Dm * (U + 0.5 * h * k2));
      const Mat k4 = mi * (D1 * (U + h * k3));
      U = U + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      U = polar_unitary(U);
    }
    R.U.push_back(U);
  }
  double ur = 0.0;
  for (const Mat& Uk : R.U) {
    ur = std::max(ur, opnorm((Uk.adjoint() * Uk - Mat::Identity(dim, dim)).eval()));
  }
  R.max_unitarity_residual = ur;
  return R;
}

TransportAudit projector_transport_audit(const Interaction& Phi,
                                         const SiteSet& volume,
                                         const HilbertStructure& HS,
                                         double gamma,
                                         const std::vector<double>& s_grid,
                                         double ode_step, double window,
                                         double T, double quad_step) {
  resolve_defaults(gamma, &T, &quad_step);
  const FlowResult R = flow(Phi, volume, HS, gamma, s_grid, ode_step, T, quad_step);
  TransportAudit A;
  A.s = s_grid;
  const Mat P0 = ground_projector(hamiltonian(Phi, volume, s_grid.front(), HS).matrix, window);
  for (std::size_t k = 0; k < s_grid.size(); ++k) {
    const Mat Ps = ground_projector(hamiltonian(Phi, volume, s_grid[k], HS).matrix, window);
    const double r = opnorm((R.alpha(k, Ps) - P0).eval());
    A.residual.push_back(r);
    A.max_residual = std::max(A.max_residual, r);
  }

  // Empirical error budget.
  double max_hp = 0.0, total_var = 0.0;
  for (double s : s_grid) {
    max_hp = std::max(max_hp, opnorm(hamiltonian_derivative(Phi, volume, s, HS).matrix));
  }
  total_var = max_hp * (s_grid.back() - s_grid.front());
  A.tail_term = 4.0 * total_var * W_tail_integral(T, gamma);
  // rk4 step-doubling on the endpoint unitary.
  const std::vector<double> ends = {s_grid.front(), s_grid.back()};
  const FlowResult Rh = flow(Phi, volume, HS, gamma, ends, ode_step, T, quad_step);
  const FlowResult Rh2 = flow(Phi, volume, HS, gamma, ends, 0.5 * ode_step, T, quad_step);
  A.ode_term = 4.0 * opnorm((Rh.U.back() - Rh2.U.back()).eval());
  // Quadrature refinement of the generator, integrated along the curve.
  double dmax = 0.0;
  for (double s : {s_grid.front(), 0.5 * (s_grid.front() + s_grid.back()), s_grid.back()}) {
    const Mat Dc = hastings_generator(Phi, volume, HS, s, gamma, T, quad_step);
    const Mat Df = hastings_generator(Phi, volume, HS, s, gamma, 2.0 * T, 0.5 * quad_step);
    dmax = std::max(dmax, opnorm((Dc - Df).eval()));
  }
  A.quad_term = 4.0 * dmax * (s_grid.back() - s_grid.front());
  return A;
}

// ---------------------------------------------------------------------------
// Hastings interaction
// ---------------------------------------------------------------------------

TransformedInteraction hastings_interaction(const Interaction& Phi,
                                            const MetricSpace& Gm,
                                            const SiteSet& volume,
                                            const HilbertStructure& HS,
                                            double gamma,
                                            const ProductState& rho,
                                            double T, double quad_step) {
  resolve_defaults(gamma, &T, &quad_step);
  const Interaction dPhi = derivative_interaction(Phi);

  auto cache = std::make_shared<std::map<double, WeightedIntegralOperator>>();
  auto mu = std::make_shared<std::mutex>();

  QuasiLocalMap K;
  K.name = "G_weighted_integral";
  K.volume = volume;
  K.adjoint_compatible = true;  // S odd => G(A)^* = G(A^*)
  K.apply = [Phi, volume, HS, gamma, T, quad_step, cache, mu](
                const LocalOperator& A, double s) -> Mat {
    const WeightedIntegralOperator* W = nullptr;
    {
      std::lock_guard<std::mutex> lock(*mu);
      auto it = cache->find(s);
      if (it == cache->end()) {
        const Mat H = hamiltonian(Phi, volume, s, HS).matrix;
        it = cache
                 ->emplace(s, make_weighted_integral(H, gamma, WiMode::G, T,
                                                     quad_step))
                 .first;
      }
      W = &it->second;
    }
    return W->apply(embed(A, volume, HS).matrix);
  };
  // Declared profile: ||G(A)|| <= ||W_gamma||_1 ||A||; commutator decay from
  // the generic exponential-kernel envelope with a unit-rate distance weight.
  K.params.B = W_l1_norm(gamma);
  K.params.p = 0.0;
  K.params.C = 2.0;
  K.params.q = 1.0;
  {
    // Lieb-Robinson input for the envelope: exponential weight a = 1 on the
    // base power-law F, sampled over the parameter range of Phi.
    const DecayFunction F0 = DecayFunction::power(2.0);
    double C_lr = 2.0, v_lr = 2.0;
    if (!volume.empty()) {
      const SiteSet X = {volume.front()};
      const SiteSet Y = {volume.back()};
      const LRVelocity lv =
          lr_velocity_bound(Phi, F0, 1.0, Gm, volume, X, Y, 0.0, 1.0);
      const DecayFunction Fa = weighted_f(F0, Weight::power(1.0, 1.0));
      const FConstants fc = f_constants(Fa, Gm);
      C_lr = 2.0 * f_uniform_norm(F0, Gm) / fc.conv_constant;
      v_lr = std::max(1e-6, lv.va);
    }
    K.params.G = flow_ql_bound(C_lr, v_lr, Weight::power(1.0, 1.0), gamma, 0.5,
                               WiMode::G);
  }
  return transform_interaction(K, dPhi, Gm, volume, HS, rho);
}

// ---------------------------------------------------------------------------
// Flow quasi-locality envelopes
// ---------------------------------------------------------------------------

double flow_ql_threshold(double v, const Weight& g, double gamma,
                         double epsilon) {
  if (epsilon <= 0.0 || epsilon >= 1.0) {
    throw std::invalid_argument("flow_ql_threshold: epsilon must be in (0,1)");
  }
  if (v <= 0.0 || gamma <= 0.0) {
    throw std::invalid_argument("flow_ql_threshold: v and gamma must be positive");
  }
  const WeightTables& W = weight_tables();
  const double gamma_eps = (1.0 - epsilon) * gamma / v;
  const double m = std::max(9.0, std::sqrt(W.eta * gamma_eps / epsilon));
  const double gstar = std::exp(m) / gamma_eps;  // need g(d) >= gstar
  double hi = 1.0;
  while (g(hi) < gstar && hi < 1e300) hi *= 2.0;
  if (g(hi) < gstar) {
    // Slowly growing g (e.g. logarithmic): the crossover lies beyond every
    // representable distance, so the plateau covers the whole axis.
    return std::numeric_limits<double>::infinity();
  }
  double lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) >= gstar) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

DecayFunction flow_ql_bound(double C, double v, const Weight& g, double gamma,
                            double epsilon, WiMode mode) {
  if (C < 0.0) throw std::invalid_argument("flow_ql_bound: C must be non-negative");
  const WeightTables& W = weight_tables();
  const double c = W.c, eta = W.eta;
  const double gamma_eps = (1.0 - epsilon) * gamma / v;
  const double dstar = flow_ql_threshold(v, g, gamma, epsilon);
  const double e4 = std::exp(4.0);
  std::string label = (mode == WiMode::F) ? "G_F^eps" : "G_G^eps";
  if (g.kind == Weight::Kind::Log) {
    label += " [logarithmic g: no finite moments]";
  }
  if (mode == WiMode::F) {
    auto fn = [C, v, g, gamma, c, eta, e4, gamma_eps, dstar](double d) {
      if (d <= dstar) return 1.0;
      const double f = f_sub_exp(gamma_eps, g(d));
      const double val =
          c * (C * gamma / v + (27.0 / 7.0) * e4 * f * f) * std::exp(-eta * f);
      return std::min(1.0, val);
    };
    return DecayFunction::transformed(fn, label);
  }
  const double wl1 = W_l1_norm(gamma);
  auto fn = [C, v, g, gamma, c, eta, e4, gamma_eps, dstar, wl1](double d) {
    if (d <= dstar) return wl1;
    const double f = f_sub_exp(gamma_eps, g(d));
    const double val = (C / (2.0 * v) +
                        (243.0 / (49.0 * gamma * eta)) * c * e4 * f * f * f) *
                       std::exp(-eta * f);
    return std::min(wl1, val);
  };
  return DecayFunction::transformed(fn, label);
}

// ---------------------------------------------------------------------------
// Automorphic equivalence
// ---------------------------------------------------------------------------

EquivalenceReport automorphic_equivalence_audit(const Interaction& Phi,
                                                const SiteSet& volume,
                                                const HilbertStructure& HS,
                                                double gamma,
                                                const std::vector<double>& s_grid,
                                                double ode_step,
                                                double T, double quad_step) {
  const double window = 2.0 * gamma;
  EquivalenceReport E;
  E.s = s_grid;
  std::vector<Mat> P(s_grid.size());
  std::vector<Eigen::VectorXd> evals(s_grid.size());
  std::vector<Mat> evecs(s_grid.size());
  bool one_dim = true;
  for (std::size_t k = 0; k < s_grid.size(); ++k) {
    const Mat H = hamiltonian(Phi, volume, s_grid[k], HS).matrix;
    const GapPoint gp = ground_cluster(H, window);
    if (!gp.gapped) {
      throw std::invalid_argument(
          "automorphic_equivalence_audit: curve is not uniformly gapped");
    }
    one_dim = one_dim && gp.cluster_size == 1;
    P[k] = ground_projector(H, window);
    Eigen::SelfAdjointEigenSolver<Mat> es(H);
    evals[k] = es.eigenvalues();
    evecs[k] = es.eigenvectors();
  }
  E.one_dimensional = one_dim;

  const FlowResult R = flow(Phi, volume, HS, gamma, s_grid, ode_step, T, quad_step);
  const std::size_t n = s_grid.size();
  E.residuals.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const Mat back_k = R.alpha(k, P[k]);  // = P(s0) up to numerics
    for (std::size_t l = 0; l < n; ++l) {
      // alpha_{s_k -> s_l}(P(s_k)) = U(s_l) alpha_{s_k}(P(s_k)) U(s_l)^*.
      const Mat moved = R.U[l] * back_k * R.U[l].adjoint();
      const double r = opnorm((moved - P[l]).eval());
      E.residuals(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) = r;
      E.max_residual = std::max(E.max_residual, r);
    }
  }
  if (one_dim) {
    const Vec psi0 = evecs[0].col(0);
    for (std::size_t k = 0; k < n; ++k) {
      const Vec psik = evecs[k].col(0);
      const double f = std::abs((psik.adjoint() * (R.U[k] * psi0))(0, 0));
      E.fidelity.push_back(f);
    }
    E.min_fidelity = *std::min_element(E.fidelity.begin(), E.fidelity.end());
  }
  return E;
}

}  // namespace qlv
