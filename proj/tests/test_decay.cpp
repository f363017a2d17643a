#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qlv/decay.hpp"
#include "qlv/lattice.hpp"

#include <cmath>

using namespace qlv;

TEST_CASE("weights") {
  auto g = Weight::power(1.0, 1.0);
  CHECK(g(2.0) == doctest::Approx(2.0));
  CHECK(weight_is_admissible(g));

  auto gl = Weight::log();
  CHECK(gl(0.0) == 0.0);
  CHECK(weight_is_admissible(gl));

  auto gc = Weight::capped_ratio(1.0, 2.0);
  // plateau value e^2/4 up to x = e^2, continuous at the breakpoint
  CHECK(gc(0.0) == doctest::Approx(std::exp(2.0) / 4.0));
  const double e2 = std::exp(2.0);
  CHECK(gc(e2) == doctest::Approx(e2 / 4.0));
  CHECK(gc(e2 * 1.0000001) == doctest::Approx(e2 / 4.0).epsilon(1e-5));
  CHECK(weight_is_admissible(gc));

  auto gtheta = Weight::power(0.5, 0.5);
  CHECK(weight_is_admissible(gtheta));
  CHECK_THROWS(Weight::power(1.0, 1.5));  // superadditive, rejected
}

TEST_CASE("decay functions evaluate and stay monotone") {
  auto F = DecayFunction::power(2.0);
  CHECK(F(0.0) == 1.0);
  CHECK(F(1.0) == doctest::Approx(0.25));

  auto Fg = weighted_f(F, Weight::power(1.0, 1.0));
  CHECK(Fg(1.0) == doctest::Approx(std::exp(-1.0) / 4.0));
  auto F0 = weighted_f(F, Weight::zero());
  for (double r : {0.0, 0.5, 3.0}) CHECK(F0(r) == F(r));

  auto T = DecayFunction::tabulated({0, 1, 2}, {1.0, 0.5, 0.25});
  CHECK(T(0.0) == 1.0);
  CHECK(T(0.7) == 1.0);   // previous-value step
  CHECK(T(1.5) == 0.5);
  CHECK(T(9.0) == 0.25);
  CHECK_THROWS(DecayFunction::tabulated({0, 1}, {0.5, 1.0}));

  // monotone on audit grid for each constructed function
  for (const auto* f : {&F, &Fg, &T}) {
    double prev = (*f)(0.0);
    for (int i = 1; i <= 200; ++i) {
      const double v = (*f)(i * 0.25);
      CHECK(v <= prev + 1e-15);
      CHECK(v > 0.0);
      prev = v;
    }
  }
}

TEST_CASE("uniform norm") {
  auto F = DecayFunction::power(2.0);
  auto chain5 = build_box(1, {5});
  // 1 + 2/4 + 2/9 (+ smaller tail terms) maximized at the center site
  const double expect = 1.0 + 2.0 / 4.0 + 2.0 / 9.0;
  auto k = f_constants(F, chain5);
  CHECK(k.uniform_norm == doctest::Approx(expect).epsilon(1e-14));
  CHECK(k.norm_arg == 2);

  Eigen::MatrixXd one(1, 1);
  one(0, 0) = 0.0;
  MetricSpace single(one);
  CHECK(f_uniform_norm(F, single) == doctest::Approx(F(0.0)));
  CHECK(f_uniform_norm(F, chain5) >= F(0.0));
}

TEST_CASE("convolution constant") {
  auto F = DecayFunction::power(2.0);
  auto chain3 = build_box(1, {3});
  auto k = f_constants(F, chain3);
  // frozen triple-loop oracle: 41/16 at (x,y) = (0,2)
  CHECK(k.conv_constant == doctest::Approx(41.0 / 16.0).epsilon(1e-14));
  CHECK(((k.conv_arg_x == 0 && k.conv_arg_y == 2) ||
         (k.conv_arg_x == 2 && k.conv_arg_y == 0)));

  Eigen::MatrixXd one(1, 1);
  one(0, 0) = 0.0;
  MetricSpace single(one);
  CHECK(f_convolution_constant(F, single) == doctest::Approx(F(0.0)));

  // C_F <= 2^{nu+eps} ||F|| = 4 ||F|| on a chain for F = (1+r)^{-2}
  auto chain20 = build_box(1, {20});
  auto k20 = f_constants(F, chain20);
  CHECK(k20.conv_constant <= 4.0 * k20.uniform_norm + 1e-12);
}

TEST_CASE("weighted F never increases the constants") {
  auto F = DecayFunction::power(2.0);
  auto chain = build_box(1, {10});
  auto base = f_constants(F, chain);
  for (const Weight& g : {Weight::power(0.7, 1.0), Weight::log(),
                          Weight::capped_ratio(1.0, 2.0),
                          Weight::power(0.3, 0.5)}) {
    auto Fg = weighted_f(F, g);
    auto k = f_constants(Fg, chain);
    CHECK(k.uniform_norm <= base.uniform_norm + 1e-12);
    CHECK(k.conv_constant <= base.conv_constant + 1e-12);
  }
}

TEST_CASE("moments") {
  auto G2 = DecayFunction::transformed(
      [](double r) { return std::pow(2.0, -r); }, "2^-r");
  CHECK(moment(G2, 0.0, 0.0).value == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(moment(G2, 1.0, 0.0).value == doctest::Approx(4.0).epsilon(1e-12));

  // empty sum beyond truncation: m enormous means only negligible terms
  auto r = moment(G2, 0.0, 3000.0);
  CHECK(r.value <= 1e-290);

  // iterated-moment inequality M_p(M_q) style: M_p o M_q(m) <= M_{p+q+1}(m)
  auto Mq = [&](double m) { return moment(G2, 1.0, m).value; };
  double lhs = 0.0;
  for (int n = 2; n < 60; ++n) lhs += std::pow(1.0 + n, 0.0) * Mq(n);
  const double rhs = moment(G2, 2.0, 2.0).value;
  CHECK(lhs <= rhs + 1e-9);

  // divergence guard
  auto Gflat = DecayFunction::transformed(
      [](double r) { return 1.0 / (1.0 + 1e-6 * r); }, "slow");
  CHECK_THROWS_AS(moment(Gflat, 1.0, 0.0, 20000), std::runtime_error);
}

TEST_CASE("transform_step") {
  auto F = DecayFunction::power(2.0);
  auto chain = build_box(1, {10});
  auto reg = regularity_audit(chain, 1.0);

  CHECK_THROWS(transform_step(F, 2.0, 0.01, chain, 1.0, reg.kappa));

  auto ts = transform_step(F, 2.0, 1.0, chain, 1.0, reg.kappa);
  CHECK(ts.fn(0.0) == 1.0);
  CHECK(ts.fn(2.0) == 1.0);
  CHECK(ts.fn(3.0) == doctest::Approx(1.0 / 16.0));
  auto brute = f_constants(ts.fn, chain);
  CHECK(brute.uniform_norm <= ts.norm_bound + 1e-12);
  CHECK(brute.conv_constant <= ts.conv_bound + 1e-12);

  // non-increasing by construction for c >= F(a)
  double prev = ts.fn(0.0);
  for (int i = 1; i <= 60; ++i) {
    CHECK(ts.fn(i * 0.2) <= prev + 1e-15);
    prev = ts.fn(i * 0.2);
  }

  // a = 0 leaves the function equal to F away from the origin
  auto t0 = transform_step(F, 0.0, F(0.0), chain, 1.0, reg.kappa);
  for (double rr : {0.5, 1.0, 4.0}) CHECK(t0.fn(rr) == F(rr));
}

TEST_CASE("transform_dilate and transform_shift") {
  auto chain = build_box(1, {10});
  auto F = weighted_f(DecayFunction::power(2.0), Weight::power(1.0, 1.0));

  auto d1 = transform_dilate(F, 1.0, chain);
  for (double r : {0.0, 1.0, 5.0}) CHECK(d1.fn(r) == doctest::Approx(F(r)));

  auto dh = transform_dilate(F, 0.5, chain);
  CHECK(dh.fn(2.0) == doctest::Approx(F(1.0)));
  auto brute = f_constants(dh.fn, chain);
  CHECK(brute.uniform_norm <= dh.norm_bound + 1e-12);
  CHECK(brute.conv_constant <= dh.conv_bound + 1e-12);

  auto s0 = transform_shift(F, 0.0, chain);
  for (double r : {0.0, 1.0, 5.0}) CHECK(s0.fn(r) == doctest::Approx(F(r)));

  auto s1 = transform_shift(F, 1.0, chain);
  CHECK(s1.fn(0.5) == doctest::Approx(F(0.0)));
  CHECK(s1.fn(3.0) == doctest::Approx(F(2.0)));
  auto bs = f_constants(s1.fn, chain);
  CHECK(bs.uniform_norm <= s1.norm_bound + 1e-12);
  CHECK(bs.conv_constant <= s1.conv_bound + 1e-12);
  // sandwich F(r) <= F~(r) <= factor * F(r)
  const double factor = std::max(1.0, F(0.0)) / F(1.0);
  for (int i = 0; i <= 40; ++i) {
    const double r = 0.25 * i;
    CHECK(F(r) <= s1.fn(r) + 1e-15);
    CHECK(s1.fn(r) <= factor * F(r) + 1e-15);
  }

  // floor trick: F(r) <= F(floor(r)) <= shift-by-1 transform of F
  for (int i = 0; i <= 40; ++i) {
    const double r = 0.25 * i;
    CHECK(F(r) <= F(std::floor(r)) + 1e-15);
    CHECK(F(std::floor(r)) <= s1.fn(r) + 1e-15);
  }

  CHECK_THROWS(transform_dilate(DecayFunction::tabulated({0}, {1.0}), 0.5,
                                chain));
}
