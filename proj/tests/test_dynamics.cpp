#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qlv/dynamics.hpp"

#include <cmath>

using namespace qlv;

namespace {

HilbertStructure qubits(int N) {
  SiteSet v(N);
  for (int i = 0; i < N; ++i) v[i] = i;
  return HilbertStructure(v);
}

Mat rabi_exact(double t) {
  // exp(-i t sigma^x) = cos t - i sin t sigma^x
  Mat u = std::cos(t) * Mat::Identity(2, 2);
  u -= cd(0.0, 1.0) * std::sin(t) * pauli(1);
  return u;
}

}  // namespace

TEST_CASE("propagators reproduce the single-qubit closed form") {
  const auto grid = linspace(0.0, 1.2, 13);
  auto Ht = [](double) { return Mat(pauli(1)); };

  const auto Peig = propagate_eig_const(pauli(1), grid);
  const auto Pmid = propagate_expmid(Ht, grid, 32);
  const auto Prk4 = propagate_rk4(Ht, grid, 32);
  const auto Pdys = propagate_dyson(Ht, grid, 12, 129);
  for (int k = 0; k < 13; ++k) {
    const Mat ex = rabi_exact(grid[k]);
    CHECK(opnorm(Mat(Peig.U[k] - ex)) < 1e-13);
    CHECK(opnorm(Mat(Pmid.U[k] - ex)) < 1e-12);
    CHECK(opnorm(Mat(Prk4.U[k] - ex)) < 1e-9);
    CHECK(opnorm(Mat(Pdys.U[k] - ex)) < 1e-7);
  }
  CHECK(Peig.unitarity_residual() < 1e-13);
  CHECK(Prk4.unitarity_residual() < 1e-13);  // polar-corrected
  CHECK(Pdys.unitarity_residual() < 1e-7);
}

TEST_CASE("time-dependent commuting generator has an explicit solution") {
  // H(t) = h(t) sigma^z with h(t) = 1 + 0.5 sin t: U(t) = exp(-i Theta(t)
  // sigma^z), Theta the primitive of h.
  auto h = [](double t) { return 1.0 + 0.5 * std::sin(t); };
  auto theta = [](double t) { return t + 0.5 * (1.0 - std::cos(t)); };
  auto Ht = [h](double t) { return Mat(h(t) * pauli(3)); };
  const auto grid = linspace(0.0, 2.0, 21);
  const auto Pmid = propagate_expmid(Ht, grid, 64);
  const auto Prk4 = propagate_rk4(Ht, grid, 64);
  const auto Pdys = propagate_dyson(Ht, grid, 12, 129);
  for (int k = 0; k < 21; ++k) {
    Mat ex = Mat::Zero(2, 2);
    ex(0, 0) = std::exp(cd(0.0, -theta(grid[k])));
    ex(1, 1) = std::exp(cd(0.0, theta(grid[k])));
    CHECK(opnorm(Mat(Pmid.U[k] - ex)) < 1e-7);
    CHECK(opnorm(Mat(Prk4.U[k] - ex)) < 1e-9);
    CHECK(opnorm(Mat(Pdys.U[k] - ex)) < 1e-6);
  }
}

TEST_CASE("cocycle residuals are honest re-integrations") {
  HilbertStructure HS = qubits(4);
  const SiteSet vol = {0, 1, 2, 3};
  auto Phi = tfi_chain_t(
      4, 1.0, [](double t) { return 1.0 + 0.5 * std::sin(t); },
      [](double t) { return 0.5 * std::cos(t); });
  auto Ht = hamiltonian_generator(Phi, vol, HS);
  const auto grid = linspace(0.0, 1.0, 11);
  const auto P = propagate_expmid(Ht, grid, 48);
  CHECK(P.unitarity_residual() < 1e-12);
  CHECK(P.cocycle_residual(0, 10) < 1e-12);
  CHECK(P.cocycle_residual(3, 7) < 1e-12);

  const auto Prk = propagate_rk4(Ht, grid, 48);
  CHECK(Prk.cocycle_residual(2, 9) < 1e-9);

  const auto Pc = propagate_eig_const(
      hamiltonian(tfi_chain(4, 1.0, 1.0), vol, 0.0, HS).matrix, grid);
  CHECK(Pc.cocycle_residual(0, 10) < 1e-12);
}

TEST_CASE("Heisenberg evolution and its generator") {
  // tau_t(sigma^z) = cos(2t) sigma^z + sin(2t) sigma^y under H = sigma^x.
  const auto grid = linspace(0.0, 0.3, 2);
  const auto P = propagate_eig_const(pauli(1), grid);
  const Mat got = P.heisenberg(1, pauli(3));
  const Mat ex = std::cos(0.6) * pauli(3) + std::sin(0.6) * pauli(2);
  CHECK(opnorm(Mat(got - ex)) < 1e-13);

  // d/dt tau_{t,0}(A) = tau_{t,0}(i [H(t), A]) by finite differences.
  HilbertStructure HS = qubits(3);
  const SiteSet vol = {0, 1, 2};
  auto Phi = tfi_chain_t(
      3, 1.0, [](double t) { return 2.0 - t; }, [](double) { return -1.0; });
  auto Ht = hamiltonian_generator(Phi, vol, HS);
  const Mat A = embed({{1}, pauli(3)}, vol, HS).matrix;
  const double t = 0.4, eps = 1e-5;
  // shared-grid finite difference: the common segment [0, t-eps] cancels
  const auto Q2 = propagate_expmid(Ht, {0.0, t - eps, t + eps}, 4096);
  const Mat fd = (Q2.heisenberg(2, A) - Q2.heisenberg(1, A)) / (2.0 * eps);
  const auto Q = propagate_expmid(Ht, {0.0, t}, 4096);
  const Mat gen = Q.heisenberg(1, Mat(cd(0.0, 1.0) * commutator(Ht(t), A)));
  CHECK(opnorm(Mat(fd - gen)) < 1e-6);
}

TEST_CASE("interaction picture factorization") {
  HilbertStructure HS = qubits(3);
  const SiteSet vol = {0, 1, 2};
  auto Phi = tfi_chain_t(
      3, 1.0, [](double t) { return 1.0 + 0.3 * t; },
      [](double) { return 0.3; });
  auto Ht = hamiltonian_generator(Phi, vol, HS);
  const Mat H0 = hamiltonian(classical_ising_chain(3, 1.0), vol, 0.0, HS)
                     .matrix;
  const auto grid = linspace(0.0, 1.0, 6);
  const auto Pint = propagate_interaction_picture(H0, Ht, grid, 512);
  const auto Pref = propagate_expmid(Ht, grid, 512);
  for (int k = 0; k < 6; ++k)
    CHECK(opnorm(Mat(Pint.U[k] - Pref.U[k])) < 1e-6);
}

TEST_CASE("perturbed norm-preserving ODE bound") {
  auto A = [](double t) { return Mat((1.0 + t) * pauli(1)); };
  auto Bz = [](double) { return Mat(Mat::Zero(2, 2)); };
  auto B = [](double t) { return Mat(0.3 * std::cos(3.0 * t) * pauli(3)); };
  const Mat V0 = pauli(3) + 0.2 * pauli(1);

  const auto clean = norm_preserving_ode_audit(A, Bz, V0, 0.0, 2.0);
  CHECK(clean.pass());
  CHECK(clean.lhs == doctest::Approx(opnorm(V0)).epsilon(1e-7));

  const auto pert = norm_preserving_ode_audit(A, B, V0, 0.0, 2.0);
  CHECK(pert.pass());
  // int_0^2 0.3 |cos(3t)| dt = 0.1 int_0^6 |cos u| du = 0.1 (4 + sin 6)
  CHECK(pert.rhs == doctest::Approx(opnorm(V0) + 0.1 * (4.0 + std::sin(6.0)))
                        .epsilon(1e-3));
}

TEST_CASE("Duhamel derivative bound") {
  auto H = [](double lam, double t) {
    return Mat(pauli(3) + lam * (1.0 + 0.2 * std::sin(t)) * pauli(1));
  };
  const auto audit = duhamel_audit(H, 0.5, 0.0, 1.5);
  CHECK(audit.pass());
  CHECK(audit.fd_norm > 0.1);  // genuinely sensitive to lambda
  // bound = int_0^1.5 (1 + 0.2 sin t) dt
  CHECK(audit.bound ==
        doctest::Approx(1.5 + 0.2 * (1.0 - std::cos(1.5))).epsilon(1e-6));
}

TEST_CASE("Lieb-Robinson bound dominates the exact commutator") {
  const int N = 6;
  const auto G = build_box(1, {N});
  HilbertStructure HS = qubits(N);
  const SiteSet vol = G.all_sites();
  const auto F =
      weighted_f(DecayFunction::power(2.0), Weight::power(1.0, 1.0));
  const auto Phi = tfi_chain(N, 1.0, 1.0);
  const LocalOperator A{{0}, pauli(1)};
  const LocalOperator B{{N - 1}, pauli(1)};
  const auto samples = lr_audit(Phi, F, G, vol, HS, A, B, 0.0,
                                linspace(0.1, 2.0, 8));
  for (const auto& s : samples) {
    INFO("t=", s.t, " exact=", s.exact, " bound=", s.bound);
    CHECK(s.pass());
  }
  // light cone: negligible leakage at short times, real signal later
  CHECK(samples.front().exact < 1e-3);
  CHECK(samples.back().exact > 1e-2);

  // velocity form also dominates
  const auto v = lr_velocity_bound(Phi, DecayFunction::power(2.0), 1.0, G,
                                   vol, A.support, B.support, 0.0, 2.0);
  CHECK(v.va > 0.0);
  CHECK(samples.back().exact <= v.value + 1e-6);
}

TEST_CASE("continuity in the interaction and in the volume") {
  const int N = 7;
  const auto G = build_box(1, {N});
  HilbertStructure HS = qubits(N);
  const SiteSet vol = G.all_sites();
  const auto F =
      weighted_f(DecayFunction::power(2.0), Weight::power(1.0, 1.0));
  const auto Phi = tfi_chain(N, 1.0, 1.0);
  const LocalOperator A{{0, 1}, kron(pauli(3), pauli(3))};

  // 1% coupling perturbation
  const auto Psi = tfi_chain(N, 1.01, 1.0);
  const auto d1 =
      interaction_difference_audit(Phi, Psi, F, G, vol, HS, A, 0.0, 0.5);
  INFO("exact=", d1.exact, " bound=", d1.bound);
  CHECK(d1.pass());
  CHECK(d1.exact > 1e-6);  // the difference is genuinely nonzero
  CHECK(d1.slack() >= 1.0);

  // volume restriction to the first five sites
  const SiteSet sub = {0, 1, 2, 3, 4};
  const auto d2 = volume_difference_audit(Phi, F, G, vol, sub, HS, A, 0.0,
                                          0.5);
  INFO("exact=", d2.exact, " bound=", d2.bound);
  CHECK(d2.pass());
  CHECK(d2.exact > 1e-8);
  CHECK(d2.slack() >= 1.0);

  // identical interactions: zero difference, zero bound
  const auto d0 =
      interaction_difference_audit(Phi, Phi, F, G, vol, HS, A, 0.0, 0.5);
  CHECK(d0.exact < 1e-12);
  CHECK(d0.bound < 1e-12);
}
