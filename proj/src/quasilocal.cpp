#include "qlv/quasilocal.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace qlv {

QuasiLocalMap identity_map(const SiteSet& volume, const HilbertStructure& HS) {
  QuasiLocalMap K;
  K.name = "identity";
  K.volume = volume;
  HilbertStructure hs = HS;
  SiteSet vol = volume;
  K.apply = [vol, hs](const LocalOperator& A, double) {
    return embed(A, vol, hs).matrix;
  };
  K.params.B = 1.0;
  K.params.p = 0.0;
  K.params.C = 2.0;
  K.params.q = 0.0;
  K.params.G = DecayFunction::transformed(
      [](double r) { return std::exp(-20.0 * r); }, "exp(-20 r)");
  return K;
}

QuasiLocalMap heisenberg_map(const Interaction& Phi, const DecayFunction& F0,
                             double a, const MetricSpace& Gm,
                             const SiteSet& volume, const HilbertStructure& HS,
                             double s, double horizon) {
  const DecayFunction Fa = weighted_f(F0, Weight::power(a, 1.0));
  const FConstants k0 = f_constants(F0, Gm);
  const FConstants ka = f_constants(Fa, Gm);
  const double I =
      std::max(its_integral(Phi, Fa, Gm, s - horizon, s),
               its_integral(Phi, Fa, Gm, s, s + horizon));

  QuasiLocalMap K;
  K.name = "tau";
  K.volume = volume;
  HilbertStructure hs = HS;
  SiteSet vol = volume;
  Interaction Phic = Phi;
  if (!Phi.time_dependent) {
    // cache the eigenbasis once; every apply is then two rotations
    const Mat H = hamiltonian(Phi, volume, s, HS).matrix;
    Eigen::SelfAdjointEigenSolver<Mat> es(H);
    const Mat V = es.eigenvectors();
    const Eigen::VectorXd ev = es.eigenvalues();
    K.apply = [V, ev, vol, hs, s](const LocalOperator& A, double t) {
      const Mat Afull = embed(A, vol, hs).matrix;
      if (t == s) return Afull;
      const Vec phase =
          (cd(0, -1) * (t - s) * ev.cast<cd>().array()).exp().matrix();
      const Mat U = V * phase.asDiagonal() * V.adjoint();
      return Mat(U.adjoint() * Afull * U);
    };
  } else {
    K.apply = [Phic, vol, hs, s](const LocalOperator& A, double t) {
      const Mat Afull = embed(A, vol, hs).matrix;
      if (t == s) return Afull;
      auto Ht = hamiltonian_generator(Phic, vol, hs);
      const Propagator P = propagate_expmid(Ht, {s, t}, 256);
      return P.heisenberg(1, Afull);
    };
  }
  K.params.B = 1.0;
  K.params.p = 0.0;
  K.params.q = 1.0;
  K.params.C =
      (2.0 / ka.conv_constant) * std::expm1(2.0 * I) * k0.uniform_norm;
  K.params.G = DecayFunction::transformed(
      [a](double r) { return std::exp(-a * r); }, "exp(-a r)");
  return K;
}

// ============================================================================
// Empirical decay
// ============================================================================

DecayEstimate estimate_decay(const QuasiLocalMap& K, const MetricSpace& Gm,
                             const HilbertStructure& HS, double t,
                             int support_cap) {
  // probe supports: singletons, and nearest pairs when the cap allows
  std::vector<SiteSet> supports;
  for (int x : K.volume) supports.push_back({x});
  if (support_cap >= 2) {
    for (size_t i = 0; i < K.volume.size(); ++i)
      for (size_t j = i + 1; j < K.volume.size(); ++j)
        if (Gm.dist(K.volume[i], K.volume[j]) <= 1.0)
          supports.push_back({K.volume[i], K.volume[j]});
  }

  std::map<double, double> table;
  for (const auto& X : supports) {
    std::vector<Mat> basisA;
    if (X.size() == 1) {
      for (int k = 1; k <= 3; ++k) basisA.push_back(pauli(k));
    } else {
      for (int k = 0; k <= 3; ++k)
        for (int l = 0; l <= 3; ++l) {
          if (k == 0 && l == 0) continue;
          basisA.push_back(kron(pauli(k), pauli(l)));
        }
    }
    std::vector<Mat> images;
    for (const Mat& A : basisA) images.push_back(K({X, A}, t));
    for (int y : K.volume) {
      const double d = Gm.dist_sets(X, {y});
      if (d <= 0.0) continue;
      double worst = 0.0;
      for (const Mat& KA : images)
        for (int k = 1; k <= 3; ++k) {
          const Mat B = embed({{y}, pauli(k)}, K.volume, HS).matrix;
          worst = std::max(worst, opnorm(commutator(KA, B)));
        }
      worst /= std::pow(static_cast<double>(X.size()), K.params.q);
      auto [it, inserted] = table.try_emplace(d, worst);
      if (!inserted) it->second = std::max(it->second, worst);
    }
  }

  DecayEstimate out;
  for (const auto& [d, v] : table) {
    out.distances.push_back(d);
    out.values.push_back(v);
  }
  // suffix-max accumulation makes the table non-increasing
  for (int i = static_cast<int>(out.values.size()) - 2; i >= 0; --i)
    out.values[i] = std::max(out.values[i], out.values[i + 1]);
  return out;
}

// ============================================================================
// Local approximation
// ============================================================================

LocalApprox local_approx(const QuasiLocalMap& K, const LocalOperator& A,
                         const MetricSpace& Gm, const HilbertStructure& HS,
                         int n, const ProductState& rho, double t) {
  const Mat KA = K(A, t);
  const SiteSet Xn = set_intersection(inflate(Gm, A.support, n), K.volume);
  const LocalOperator approx =
      conditional_expectation({K.volume, KA}, Xn, rho, HS);
  LocalApprox out;
  out.approx = approx;
  out.error = opnorm(Mat(KA - approx.matrix));
  out.bound = 2.0 * K.params.C *
              std::pow(static_cast<double>(A.support.size()), K.params.q) *
              opnorm(A) * K.params.G(n);
  return out;
}

std::vector<BoundCheck> shell_decay_audit(const QuasiLocalMap& K,
                                          const LocalOperator& A,
                                          const MetricSpace& Gm,
                                          const HilbertStructure& HS,
                                          const ProductState& rho, double t,
                                          int n_max) {
  const Mat KA = K(A, t);
  const LocalOperator KAop{K.volume, KA};
  const double amp = std::pow(static_cast<double>(A.support.size()),
                              K.params.q) *
                     opnorm(A);
  std::vector<BoundCheck> out;
  Mat partial = Mat::Zero(KA.rows(), KA.cols());
  for (int n = 0; n <= n_max; ++n) {
    const LocalOperator shell =
        local_decomposition(KAop, Gm, A.support, n, rho, HS);
    partial += shell.matrix;
    if (n >= 1) {
      BoundCheck c;
      c.what = "shell n=" + std::to_string(n);
      c.lhs = opnorm(shell);
      c.rhs = 4.0 * K.params.C * amp * K.params.G(n - 1.0);
      out.push_back(c);
    }
  }
  // telescoping: the partial sum equals Pi_{X(n_max)}(K(A)) exactly
  const SiteSet Xn =
      set_intersection(inflate(Gm, A.support, n_max), K.volume);
  const Mat pi = conditional_expectation(KAop, Xn, rho, HS).matrix;
  BoundCheck tele;
  tele.what = "telescoping";
  tele.lhs = opnorm(Mat(partial - pi));
  tele.rhs = 1e-10;
  out.push_back(tele);
  return out;
}

// ============================================================================
// Composition decay calculators
// ============================================================================

QuasiLocalParams composition_bound(const QuasiLocalParams& k1,
                                   const QuasiLocalParams& k2,
                                   CompositionMode mode, double nu,
                                   double kappa) {
  QuasiLocalParams out;
  const DecayFunction G1 = k1.G;
  const DecayFunction G2 = k2.G;
  const double q2nu = k2.q * nu;
  if (mode == CompositionMode::OuterBounded) {
    const double K2norm = k2.B;  // bounded outer map, p2 = 0 expected
    out.B = k1.B * K2norm;
    out.p = k1.p;
    out.q = k1.p + k2.q;
    out.C = std::max(std::pow(kappa, k2.q) * k1.B * k2.C,
                     4.0 * k1.C * K2norm);
    out.G = DecayFunction::transformed(
        [G1, G2, q2nu](double r) {
          return std::pow(r / 2.0, q2nu) * G2(r / 2.0) + G1(r / 2.0);
        },
        "composed(outer-bounded)");
    return out;
  }
  // General composition via the conditional-expectation series; needs the
  // (nu p2)-th moment of G1.
  const double m1 = [&] {
    const MomentResult r = moment(G1, nu * k2.p, 0.0);
    return r.value + r.tail;
  }();
  out.B = k2.B * (k1.B + 4.0 * k1.C * std::pow(kappa, k2.p) * m1);
  out.p = k2.p + std::max(k1.p, k1.q);
  out.C = std::max(std::pow(kappa, k2.q) * k1.B * k2.C,
                   8.0 * std::pow(kappa, k2.p) * k1.C * k2.B);
  out.q = std::max(k1.p, k1.q) + std::max(k2.p, k2.q);
  const double p2nu = k2.p * nu;
  out.G = DecayFunction::transformed(
      [G1, G2, q2nu, p2nu](double r) {
        const MomentResult tail = moment(G1, p2nu, r / 2.0);
        return std::pow(r / 2.0, q2nu) * G2(r / 2.0) + tail.value + tail.tail;
      },
      "composed(general)");
  return out;
}

Mat composition_series(const QuasiLocalMap& K2, const QuasiLocalMap& K1,
                       const LocalOperator& A, const MetricSpace& Gm,
                       const HilbertStructure& HS, const ProductState& rho,
                       double t) {
  const Mat K1A = K1(A, t);
  const LocalOperator K1Aop{K1.volume, K1A};
  Mat acc;
  SiteSet prev;
  const int n_cap = static_cast<int>(std::ceil(Gm.diameter())) + 1;
  for (int n = 0; n <= n_cap; ++n) {
    const SiteSet Zn = set_intersection(inflate(Gm, A.support, n), K1.volume);
    if (n > 0 && Zn == prev) continue;  // zero shell
    const LocalOperator shell =
        local_decomposition(K1Aop, Gm, A.support, n, rho, HS);
    const Mat term = K2({K1.volume, shell.matrix}, t);
    if (acc.size() == 0)
      acc = term;
    else
      acc += term;
    prev = Zn;
    if (Zn == K1.volume) break;
  }
  return acc;
}

double rho_independence_audit(const QuasiLocalMap& K2, const QuasiLocalMap& K1,
                              const LocalOperator& A, const MetricSpace& Gm,
                              const HilbertStructure& HS,
                              const ProductState& rho_a,
                              const ProductState& rho_b, double t) {
  const Mat Sa = composition_series(K2, K1, A, Gm, HS, rho_a, t);
  const Mat Sb = composition_series(K2, K1, A, Gm, HS, rho_b, t);
  return opnorm(Mat(Sa - Sb));
}

// ============================================================================
// Transformed interactions
// ============================================================================

namespace {

struct TransformCache {
  QuasiLocalMap K;
  Interaction Phi;
  MetricSpace Gm;
  SiteSet volume;
  HilbertStructure HS;
  ProductState rho;
  std::map<double, std::map<SiteSet, Mat>> by_t;

  TransformCache(QuasiLocalMap k, Interaction phi, MetricSpace g, SiteSet v,
                 HilbertStructure h, ProductState r)
      : K(std::move(k)),
        Phi(std::move(phi)),
        Gm(std::move(g)),
        volume(std::move(v)),
        HS(std::move(h)),
        rho(std::move(r)) {}

  const std::map<SiteSet, Mat>& snapshot(double t) {
    auto it = by_t.find(t);
    if (it != by_t.end()) return it->second;
    std::map<SiteSet, Mat> buckets;
    const int n_cap = static_cast<int>(std::ceil(Gm.diameter())) + 1;
    for (size_t i = 0; i < Phi.terms.size(); ++i) {
      const SiteSet& X = Phi.terms[i].X;
      const Mat KA = K({X, Phi.terms[i].op(t)}, t);
      // n = 0 core
      SiteSet Zprev = set_intersection(X, volume);
      LocalOperator core_prev =
          conditional_expectation_core({volume, KA}, Zprev, rho, HS);
      add(buckets, Zprev, core_prev.matrix);
      for (int n = 1; n <= n_cap; ++n) {
        const SiteSet Zn = set_intersection(inflate(Gm, X, n), volume);
        if (Zn == Zprev) continue;
        const LocalOperator core_n =
            conditional_expectation_core({volume, KA}, Zn, rho, HS);
        const Mat shell =
            core_n.matrix - embed(core_prev, Zn, HS).matrix;
        add(buckets, Zn, shell);
        Zprev = Zn;
        core_prev = core_n;
        if (Zn == volume) break;
      }
    }
    if (K.adjoint_compatible)
      for (auto& [Z, M] : buckets) M = 0.5 * (M + Mat(M.adjoint()));
    return by_t.emplace(t, std::move(buckets)).first->second;
  }

 private:
  static void add(std::map<SiteSet, Mat>& buckets, const SiteSet& Z,
                  const Mat& M) {
    auto [it, inserted] = buckets.try_emplace(Z, M);
    if (!inserted) it->second += M;
  }
};

}  // namespace

TransformedInteraction transform_interaction(const QuasiLocalMap& K,
                                             const Interaction& Phi,
                                             const MetricSpace& Gm,
                                             const SiteSet& volume,
                                             const HilbertStructure& HS,
                                             const ProductState& rho) {
  auto cache = std::make_shared<TransformCache>(K, Phi, Gm, volume, HS, rho);
  // the support list is purely geometric, hence parameter-independent
  const auto& probe = cache->snapshot(Phi.t0);

  TransformedInteraction out;
  out.psi.name = "transformed(" + Phi.name + ")";
  out.psi.t0 = Phi.t0;
  out.psi.t1 = Phi.t1;
  out.psi.time_dependent = true;  // K_t and Phi(t) both move
  for (const auto& [Z, M] : probe) {
    InteractionTerm term;
    term.X = Z;
    SiteSet Zc = Z;
    term.op = [cache, Zc](double t) { return cache->snapshot(t).at(Zc); };
    out.psi.terms.push_back(std::move(term));
  }
  QuasiLocalMap Kc = K;
  Interaction Phic = Phi;
  SiteSet vol = volume;
  HilbertStructure hs = HS;
  out.reconstruction_residual = [cache, Kc, Phic, vol, hs](double t) {
    const auto& snap = cache->snapshot(t);
    Mat sum = Mat::Zero(hs.dim(vol), hs.dim(vol));
    for (const auto& [Z, M] : snap) sum += embed({Z, M}, vol, hs).matrix;
    const LocalOperator H = hamiltonian(Phic, vol, t, hs);
    return opnorm(Mat(sum - Kc(H, t)));
  };
  return out;
}

std::vector<BoundCheck> transform_decay_audit(const TransformedInteraction& TI,
                                              const Interaction& Phi,
                                              const QuasiLocalParams& kp,
                                              const DecayFunction& F,
                                              const MetricSpace& Gm, double t,
                                              double nu, double kappa) {
  const double phi_p = f_norm(moment_interaction(Phi, kp.p), F, Gm, t);
  const double phi_q = f_norm(moment_interaction(Phi, kp.q), F, Gm, t);
  const double fnorm = f_uniform_norm(F, Gm);
  const MomentResult m0 = moment(kp.G, 2.0 * nu + 1.0, 0.0);
  const double c1 = kp.B * phi_p +
                    4.0 * kappa * kappa * kp.C * phi_q * (m0.value + m0.tail);
  const double c2 = 4.0 * kappa * fnorm * kp.C * phi_q;

  // tabulate LHS pair sums once
  const int n = Gm.size();
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
  for (size_t i = 0; i < TI.psi.terms.size(); ++i) {
    const double nrm = TI.psi.term_norm(i, t);
    for (int x : TI.psi.terms[i].X)
      for (int y : TI.psi.terms[i].X) S(x, y) += nrm;
  }
  std::vector<BoundCheck> out;
  for (int x = 0; x < n; ++x)
    for (int y = x; y < n; ++y) {
      const double d = Gm.dist(x, y);
      BoundCheck c;
      c.what = "pair(" + std::to_string(x) + "," + std::to_string(y) + ")";
      c.lhs = S(x, y);
      const MomentResult mg =
          moment(kp.G, nu + 1.0, std::floor(d / 3.0));
      c.rhs = c1 * F(d / 3.0) + c2 * (mg.value + mg.tail);
      out.push_back(c);
    }
  return out;
}

// ============================================================================
// Difference of dynamics
// ============================================================================

DiffDynamicsBound diff_dynamics_ql_bound(const Interaction& Phi,
                                         const Interaction& Psi,
                                         const DecayFunction& F,
                                         const MetricSpace& Gm,
                                         const SiteSet& volume,
                                         const SiteSet& X, const SiteSet& Y,
                                         double s, double t, double nu,
                                         double kappa) {
  const FConstants kf = f_constants(F, Gm);
  DiffDynamicsBound out;
  const Interaction diff = linear_combination(1.0, Phi, -1.0, Psi);
  out.its_diff = its_integral(diff, F, Gm, s, t);
  const double iP = its_integral(Phi, F, Gm, s, t);
  const double iQ = its_integral(Psi, F, Gm, s, t);
  out.c1 = std::exp(2.0 * std::min(iP, iQ));
  out.c2 = (out.c1 - 1.0) * (1.0 + 5.0 * kf.uniform_norm / kf.conv_constant) +
           kappa * kappa;

  const double R = Gm.dist_sets(X, Y);
  const SiteSet XR2 = set_intersection(inflate(Gm, X, R / 2.0), volume);
  const SiteSet X3R2 = set_intersection(inflate(Gm, X, 1.5 * R), volume);
  const MomentResult mR =
      moment(F, 2.0 * nu, std::floor(R / 4.0));
  const double GR =
      (1.0 + XR2.size()) * f_set_sum(F, Gm, X, set_difference(volume, XR2)) +
      XR2.size() * f_set_sum(F, Gm, X3R2, Y) +
      XR2.size() * (mR.value + mR.tail);

  out.volume_term = out.c1 * kf.uniform_norm * static_cast<double>(X.size());
  out.decay_term = out.c2 * GR;
  out.value = (4.0 / kf.conv_constant) * out.its_diff *
              std::min(out.volume_term, out.decay_term);
  return out;
}

BoundCheck diff_dynamics_ql_audit(const Interaction& Phi,
                                  const Interaction& Psi,
                                  const DecayFunction& F,
                                  const MetricSpace& Gm, const SiteSet& volume,
                                  const HilbertStructure& HS,
                                  const LocalOperator& A,
                                  const LocalOperator& B, double s, double t,
                                  double nu, double kappa) {
  const QuasiLocalMap tP =
      heisenberg_map(Phi, F, 1.0, Gm, volume, HS, s, std::abs(t - s));
  const QuasiLocalMap tQ =
      heisenberg_map(Psi, F, 1.0, Gm, volume, HS, s, std::abs(t - s));
  const Mat diffA = tP(A, t) - tQ(A, t);
  const Mat Bfull = embed(B, volume, HS).matrix;
  BoundCheck c;
  c.what = "diff-dynamics commutator";
  c.lhs = opnorm(commutator(diffA, Bfull));
  c.rhs = opnorm(A) * opnorm(B) *
          diff_dynamics_ql_bound(Phi, Psi, F, Gm, volume, A.support, B.support,
                                 s, t, nu, kappa)
              .value;
  return c;
}

}  // namespace qlv
