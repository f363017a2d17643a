#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <vector>

#include "qlv/spectralflow.hpp"

using namespace qlv;

namespace {

HilbertStructure qubits(int N) {
  SiteSet vol;
  for (int i = 0; i < N; ++i) vol.push_back(i);
  return HilbertStructure(vol);
}

SiteSet range_set(int N) {
  SiteSet vol;
  for (int i = 0; i < N; ++i) vol.push_back(i);
  return vol;
}

Interaction tfi_ramp(int N, double h0, double h1) {
  return tfi_chain_t(
      N, 1.0, [h0, h1](double s) { return h0 + (h1 - h0) * s; },
      [h0, h1](double) { return h1 - h0; });
}

// Oscillatory integral 2 int_0^Tb f(t) trig(k t) dt by adaptive Simpson over
// short panels (a single adaptive pass over the whole range can accept a
// spuriously small coarse estimate when the integrand oscillates).
template <typename F>
double oscillatory_oracle(F f, double k, bool use_sin, double Tb) {
  double sum = 0.0;
  const double panel = 0.25;
  const int n = static_cast<int>(std::lround(Tb / panel));
  for (int j = 0; j < n; ++j) {
    const double a = j * panel;
    sum += adaptive_simpson(
        [&](double t) { return f(t) * (use_sin ? std::sin(k * t) : std::cos(k * t)); },
        a, a + panel, 1e-13);
  }
  return 2.0 * sum;
}

}  // namespace

TEST_CASE("weighted integrals: unit preservation, functions of H, Hermiticity, oracle") {
  const int dim = 8;
  const Mat H = random_hermitian(dim, split_seed(2024, 11));
  Mat A = random_hermitian(dim, split_seed(2024, 12));
  A /= opnorm(A);
  const double gamma = 1.0;

  // F(1) = 1 up to the quadrature error of m_F(0) = int w.
  const Mat F1 = weighted_integral(Mat::Identity(dim, dim), H, gamma, WiMode::F);
  CHECK(opnorm((F1 - Mat::Identity(dim, dim)).eval()) <= 1e-6);

  // G(f(H)) = 0 exactly (diagonal in the eigenbasis, S(0) = 0).
  const Mat fH = H * H + 2.0 * H;
  CHECK(opnorm(weighted_integral(fH, H, gamma, WiMode::G)) <= 1e-10);

  // Hermiticity is preserved by both modes (w real even, W real odd).
  const Mat FA = weighted_integral(A, H, gamma, WiMode::F);
  const Mat GA = weighted_integral(A, H, gamma, WiMode::G);
  CHECK(is_hermitian(FA, 1e-10));
  CHECK(is_hermitian(GA, 1e-10));

  // Independent scalar oracle: adaptive Simpson of the weight against
  // sin/cos at each eigenvalue difference.
  const WeightedIntegralOperator W = make_weighted_integral(H, gamma, WiMode::G);
  const Mat At = W.V.adjoint() * A * W.V;
  Mat Gt(dim, dim);
  const double Tb = 600.0;
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      const double k = W.evals(i) - W.evals(j);
      const double S = oscillatory_oracle(
          [gamma](double t) { return t == 0.0 ? 0.5 : W_eval(t, gamma); }, k,
          true, Tb);
      Gt(i, j) = cd(0.0, 1.0) * S * At(i, j);
    }
  }
  const Mat G_oracle = W.V * Gt * W.V.adjoint();
  CHECK(opnorm((GA - G_oracle).eval()) <= 1e-6 + 2.0 * W_tail_integral(Tb, gamma));

  CHECK_THROWS(make_weighted_integral(Mat::Random(4, 4), 1.0, WiMode::F));
}

TEST_CASE("gapped spectra: transverse-field, classical Ising, single spin") {
  // TFI h=2, N = 4 and 6: positive uniform gap along a constant curve.
  const Interaction tfi = tfi_ramp(6, 2.0, 2.0);
  const GapProfile prof =
      gap_audit(tfi, {range_set(4), range_set(6)}, {0.0, 0.5, 1.0}, 0.8);
  CHECK(prof.gapped);
  CHECK(prof.gamma_prime > 1.0);

  // Classical Ising, h = 0: two-fold degenerate ground space (width 0),
  // gap 2J to the first excitation.
  const Interaction ci = classical_ising_chain(5, 1.0);
  const GapProfile cp = gap_audit(ci, {range_set(5)}, {0.0}, 1.0);
  CHECK(cp.points.size() == 1);
  CHECK(cp.points[0].cluster_size == 2);
  CHECK(cp.points[0].cluster_width <= 1e-12);
  CHECK(cp.points[0].gap == doctest::Approx(2.0).epsilon(1e-12));

  // Single site H = h sigma^x: two-level system with gap 2h.
  Interaction single;
  single.name = "single_x";
  InteractionTerm t;
  t.X = {0};
  t.op = [](double s) { return ((1.0 + s) * pauli(1)).eval(); };
  t.dop = [](double) { return pauli(1).eval(); };
  single.terms.push_back(t);
  single.time_dependent = true;
  single.c1 = true;
  const GapProfile sp = gap_audit(single, {SiteSet{0}}, {0.0, 1.0}, 1.5);
  CHECK(sp.gapped);
  CHECK(sp.points[0].gap == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(sp.points[1].gap == doctest::Approx(4.0).epsilon(1e-12));

  // A window larger than the spectral diameter gives the not-gapped verdict.
  const GapProfile ng = gap_audit(ci, {range_set(5)}, {0.0}, 100.0);
  CHECK_FALSE(ng.gapped);
  CHECK(ng.gamma_prime == 0.0);
}

TEST_CASE("inverse Liouvillean: block commutation, identity, refinement") {
  const int N = 5;
  const HilbertStructure HS = qubits(N);
  const Interaction tfi = tfi_chain(N, 1.0, 2.0);
  const Mat H = hamiltonian(tfi, range_set(N), 0.0, HS).matrix;
  const GapPoint gp = ground_cluster(H, 1.0);
  REQUIRE(gp.gapped);
  const double gamma = 0.5 * gp.gap;
  const Mat P = ground_projector(H, 1.0);
  Mat A = random_hermitian(32, split_seed(77, 1));
  A /= opnorm(A);

  const LiouvilleResiduals R = inverse_liouvillean_audit(A, H, gamma, P);
  CHECK(R.comm_F_P <= 1e-6);
  CHECK(R.inverse_identity <= 1e-6);
  CHECK(R.offdiag_inverse <= 1e-6);
  CHECK(R.offdiag_F <= 1e-6);

  // Refinement (T x2, step /2) shrinks every residual by at least 2x. The
  // shrink is measured from a deliberately coarse base where discretization
  // dominates: at the default step the residuals already sit at the
  // interpolation floor of the master weight tables (~1e-10), where halving
  // the step cannot produce a factor-two improvement.
  const LiouvilleResiduals Rc = inverse_liouvillean_audit(
      A, H, gamma, P, 4000.0 / gamma, 0.25 / gamma);
  const LiouvilleResiduals Rf = inverse_liouvillean_audit(
      A, H, gamma, P, 8000.0 / gamma, 0.125 / gamma);
  CHECK(Rf.comm_F_P <= 0.5 * Rc.comm_F_P + 1e-12);
  CHECK(Rf.inverse_identity <= 0.5 * Rc.inverse_identity + 1e-12);
  CHECK(Rf.offdiag_inverse <= 0.5 * Rc.offdiag_inverse + 1e-12);
  CHECK(Rf.offdiag_F <= 0.5 * Rc.offdiag_F + 1e-12);

  // A commuting with H: G(A) = 0 and F(A) = A up to quadrature.
  const Mat fH = H * H;
  CHECK(opnorm(weighted_integral(fH, H, gamma, WiMode::G)) <= 1e-10);
  CHECK(opnorm((weighted_integral(fH, H, gamma, WiMode::F) - fH).eval()) <=
        1e-6 * opnorm(fH));

  // gamma above the gap is rejected.
  CHECK_THROWS(inverse_liouvillean_audit(A, H, 2.0 * gp.gap, P));
}

TEST_CASE("Hastings generator: zero derivative, Hermiticity, brute quadrature oracle") {
  const int N = 4;
  const HilbertStructure HS = qubits(N);
  const SiteSet vol = range_set(N);

  // Constant curve: H'(s) = 0 and D(s) = 0 exactly.
  const Interaction flat = tfi_ramp(N, 3.0, 3.0);
  CHECK(opnorm(hastings_generator(flat, vol, HS, 0.5, 1.0)) == 0.0);

  const Interaction ramp = tfi_ramp(N, 2.0, 4.0);
  const double gamma = 1.0;
  const double s = 0.5;
  const Mat D = hastings_generator(ramp, vol, HS, s, gamma);
  CHECK(is_hermitian(D, 1e-10));
  CHECK(opnorm(D) > 0.1);

  // Brute oracle: same eigenbasis, independent adaptive quadrature of
  // 2 int_0^Tb W(t) sin(kt) dt per eigenvalue difference, tail bounded.
  const Mat H = hamiltonian(ramp, vol, s, HS).matrix;
  const Mat Hp = hamiltonian_derivative(ramp, vol, s, HS).matrix;
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  const Mat Hpt = es.eigenvectors().adjoint() * Hp * es.eigenvectors();
  const double Tb = 600.0;
  Mat Dt(Hpt.rows(), Hpt.cols());
  for (Eigen::Index i = 0; i < Hpt.rows(); ++i) {
    for (Eigen::Index j = 0; j < Hpt.cols(); ++j) {
      const double k = es.eigenvalues()(i) - es.eigenvalues()(j);
      const double S = oscillatory_oracle(
          [gamma](double t) { return t == 0.0 ? 0.5 : W_eval(t, gamma); }, k,
          true, Tb);
      Dt(i, j) = cd(0.0, 1.0) * S * Hpt(i, j);
    }
  }
  const Mat D_oracle = es.eigenvectors() * Dt * es.eigenvectors().adjoint();
  const double tail = 2.0 * opnorm(Hp) * W_tail_integral(Tb, gamma);
  CHECK(opnorm((D - D_oracle).eval()) <= 1e-6 + tail);
}

TEST_CASE("spectral flow transports the ground projector along a gapped ramp") {
  const int N = 5;
  const HilbertStructure HS = qubits(N);
  const SiteSet vol = range_set(N);
  const Interaction ramp = tfi_ramp(N, 2.0, 4.0);

  const std::vector<double> s_grid = linspace(0.0, 1.0, 11);
  const GapProfile prof = gap_audit(ramp, {vol}, s_grid, 1.0);
  REQUIRE(prof.gapped);
  const double gamma = 0.5 * prof.gamma_prime;

  // Base quadrature: horizon just above the tail-bound domain, coarse Filon
  // step (the transport tolerance is 0.05, far above the quadrature error).
  const TransportAudit A = projector_transport_audit(
      ramp, vol, HS, gamma, s_grid, 0.05, 1.0, 8192.0 / gamma, 0.25 / gamma);
  CHECK(A.residual.front() <= 1e-12);  // alpha at s0 is the identity
  CHECK(A.max_residual <= 0.05);
  CHECK(A.max_residual <= 10.0 * A.budget());

  // Refinement (T x2, quad step /2, ode step /2) at least halves the residual.
  const TransportAudit Af = projector_transport_audit(
      ramp, vol, HS, gamma, s_grid, 0.025, 1.0, 16384.0 / gamma,
      0.125 / gamma);
  CHECK(Af.max_residual <= 0.5 * A.max_residual + 1e-12);

  // Constant curve: D = 0, U = 1, residual at machine scale.
  const Interaction flat = tfi_ramp(N, 3.0, 3.0);
  const TransportAudit Ac =
      projector_transport_audit(flat, vol, HS, gamma, s_grid, 0.1, 1.0);
  CHECK(Ac.max_residual <= 1e-9);

  const FlowResult R =
      flow(ramp, vol, HS, gamma, s_grid, 0.05, 8192.0 / gamma, 0.25 / gamma);
  CHECK(R.max_unitarity_residual <= 1e-12);  // polar projection each step
  CHECK_THROWS(flow(ramp, vol, HS, gamma, {}, 0.05));
}

TEST_CASE("Hastings interaction: reconstruction, decay, rho independence") {
  const int N = 6;
  const HilbertStructure HS = qubits(N);
  const SiteSet vol = range_set(N);
  const MetricSpace Gm = build_box(1, {N});
  const Interaction ramp = tfi_ramp(N, 2.0, 4.0);
  const GapProfile prof = gap_audit(ramp, {vol}, {0.0, 0.5, 1.0}, 1.0);
  REQUIRE(prof.gapped);
  // Any gamma below the audited gap is admissible for the construction;
  // a larger gamma concentrates the time weight and makes the shell decay
  // visible within a short chain.
  const double gamma = 2.0;
  REQUIRE(gamma <= prof.gamma_prime);

  const TransformedInteraction TI = hastings_interaction(
      ramp, Gm, vol, HS, gamma, ProductState::tracial());

  for (double s : {0.0, 0.5, 1.0}) {
    // sum_Z Psi(Z, s) telescopes exactly to D(s).
    CHECK(TI.reconstruction_residual(s) <= 1e-10);
    Mat total = Mat::Zero(HS.total_dim(), HS.total_dim());
    std::map<int, double> max_by_diam;
    for (const InteractionTerm& term : TI.psi.terms) {
      const Mat op = term.op(s);
      CHECK(is_hermitian(op, 1e-10));
      total += embed(LocalOperator{term.X, op}, vol, HS).matrix;
      const int diam = static_cast<int>(Gm.diameter(term.X));
      const double nn = opnorm(op);
      auto it = max_by_diam.find(diam);
      if (it == max_by_diam.end() || it->second < nn) max_by_diam[diam] = nn;
    }
    const Mat D = hastings_generator(ramp, vol, HS, s, gamma);
    CHECK(opnorm((total - D).eval()) <= 1e-10);
    // ||Psi(Z, s)|| non-increasing in diam(Z) beyond diameter 2, audited on
    // the shell-diameter grid: untruncated balls of radius n have diameter
    // 2n, so the even diameters carry the shell decay; odd diameters arise
    // only from boundary-truncated balls and must sit below the preceding
    // even-diameter norm.
    double prev = -1.0;
    for (const auto& [diam, nn] : max_by_diam) {
      if (diam < 2) continue;
      if (diam % 2 == 0) {
        if (prev >= 0.0) CHECK(nn <= prev + 1e-12);
        prev = nn;
      } else if (prev >= 0.0) {
        CHECK(nn <= prev + 1e-12);
      }
    }
  }

  // Product-state independence of the reconstructed sum.
  const TransformedInteraction TIp = hastings_interaction(
      ramp, Gm, vol, HS, gamma, ProductState::pure_basis(vol, 0));
  for (double s : {0.0, 1.0}) {
    Mat a = Mat::Zero(HS.total_dim(), HS.total_dim());
    Mat b = a;
    for (const InteractionTerm& term : TI.psi.terms) {
      a += embed(LocalOperator{term.X, term.op(s)}, vol, HS).matrix;
    }
    for (const InteractionTerm& term : TIp.psi.terms) {
      b += embed(LocalOperator{term.X, term.op(s)}, vol, HS).matrix;
    }
    CHECK(opnorm((a - b).eval()) <= 1e-10);
  }

  // Zero-derivative curve: Psi vanishes identically.
  const Interaction flat = tfi_ramp(N, 3.0, 3.0);
  const TransformedInteraction TI0 = hastings_interaction(
      flat, Gm, vol, HS, 1.0, ProductState::tracial());
  double maxnorm = 0.0;
  for (const InteractionTerm& term : TI0.psi.terms) {
    maxnorm = std::max(maxnorm, opnorm(term.op(0.5)));
  }
  CHECK(maxnorm <= 1e-14);
}

TEST_CASE("flow quasi-locality envelopes: plateau, tail, dominance") {
  const double gamma = 1.0, v = 4.0, C = 3.0, eps = 0.5;
  const Weight g = Weight::power(1.0, 1.0);
  const DecayFunction GF = flow_ql_bound(C, v, g, gamma, eps, WiMode::F);
  const DecayFunction GG = flow_ql_bound(C, v, g, gamma, eps, WiMode::G);
  const double dstar = flow_ql_threshold(v, g, gamma, eps);
  CHECK(dstar > 0.0);

  // Plateau values.
  CHECK(GF(0.0) == 1.0);
  CHECK(GF(0.5 * dstar) == 1.0);
  CHECK(GG(0.0) == doctest::Approx(W_l1_norm(gamma)).epsilon(1e-12));

  // Monotone non-increasing and eventually decaying beyond the plateau.
  double prev_f = 2.0, prev_g = 1e300;
  bool decayed_f = false, decayed_g = false;
  for (double d : {0.0, dstar, 2.0 * dstar, 5.0 * dstar, 20.0 * dstar, 100.0 * dstar}) {
    const double vf = GF(d), vg = GG(d);
    CHECK(vf <= prev_f + 1e-15);
    CHECK(vg <= prev_g + 1e-15);
    prev_f = vf;
    prev_g = vg;
    decayed_f = decayed_f || vf < 0.5;
    decayed_g = decayed_g || vg < 0.5 * W_l1_norm(gamma);
  }
  CHECK(decayed_f);
  CHECK(decayed_g);

  // Logarithmic g is flagged (no finite moments), not rejected.
  const DecayFunction GL =
      flow_ql_bound(C, v, Weight::log(2.0), gamma, eps, WiMode::F);
  CHECK(GL.label().find("no finite moments") != std::string::npos);

  // Empirical dominance: ||[G(A), B]|| <= 2 ||A|| ||B|| |X| G_G(d) on a chain
  // (desk distances sit on the plateau; the bound there is ||W||_1-sized).
  const int N = 6;
  const HilbertStructure HS = qubits(N);
  const SiteSet vol = range_set(N);
  const Interaction tfi = tfi_chain(N, 1.0, 2.0);
  const Mat H = hamiltonian(tfi, vol, 0.0, HS).matrix;
  const WeightedIntegralOperator W = make_weighted_integral(H, gamma, WiMode::G);
  const LocalOperator A{{0}, pauli(3)};
  const LocalOperator B{{N - 1}, pauli(3)};
  const Mat GA = W.apply(embed(A, vol, HS).matrix);
  const Mat Bf = embed(B, vol, HS).matrix;
  const double lhs = opnorm(commutator(GA, Bf));
  CHECK(lhs <= 2.0 * GG(static_cast<double>(N - 1)) + 1e-12);

  CHECK_THROWS(flow_ql_threshold(v, g, gamma, 1.5));
}

TEST_CASE("automorphic equivalence: projector curves connected by the flow") {
  const int N = 5;
  const HilbertStructure HS = qubits(N);
  const SiteSet vol = range_set(N);
  const Interaction ramp = tfi_ramp(N, 2.0, 4.0);
  const std::vector<double> s_grid = linspace(0.0, 1.0, 5);
  const GapProfile prof = gap_audit(ramp, {vol}, s_grid, 1.0);
  REQUIRE(prof.gapped);
  const double gamma = 0.5 * prof.gamma_prime;

  const EquivalenceReport E = automorphic_equivalence_audit(
      ramp, vol, HS, gamma, s_grid, 0.05, 8192.0 / gamma, 0.25 / gamma);
  CHECK(E.max_residual <= 0.05);
  for (std::size_t k = 0; k < s_grid.size(); ++k) {
    CHECK(E.residuals(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) <=
          2e-2);  // same-point transport: pure numerical error
  }
  CHECK(E.one_dimensional);
  CHECK(E.min_fidelity >= 0.95);

  // Constant curve: all residuals at machine scale, unit fidelity.
  const Interaction flat = tfi_ramp(N, 3.0, 3.0);
  const EquivalenceReport Ec =
      automorphic_equivalence_audit(flat, vol, HS, 1.0, s_grid, 0.1);
  CHECK(Ec.max_residual <= 1e-9);
  CHECK(Ec.min_fidelity >= 1.0 - 1e-9);

  // Non-gapped precondition: gamma far above the spectral diameter.
  CHECK_THROWS(
      automorphic_equivalence_audit(ramp, vol, HS, 1000.0, s_grid, 0.1));
}
