#pragma once

// Explicit spectral-flow weight: the sequence a_n with a_n = a1/(n ln^2 n),
// the infinite product w(t) = c * prod_n (sin(a_n t)/(a_n t))^2 normalized to
// unit integral, its rescalings w_gamma(t) = gamma * w(gamma t), the odd tail
// function W_gamma(x) = sgn(x) * int_{|x|}^inf w_gamma, Fourier-side probes
// (compact support of \hat w, the 1/k tail of \hat W), and the stretched
// sub-exponential decay envelopes that govern both tails.

#include <cstddef>
#include <vector>

#include "qlv/interactions.hpp"  // BoundCheck

namespace qlv {

// Immutable numeric tables for the weight at gamma = 1.  All gamma > 0 are
// reached exactly through the rescaling identities w_gamma(t) = gamma*w(gamma t)
// and W_gamma(x) = W_1(gamma x).
struct WeightTables {
  double a1 = 0.0;       // leading coefficient; sum_n a_n = 1/2
  double c = 0.0;        // normalization, int w = 1
  double eta = 0.0;      // 2*a1, rate in the stretched-exponential tail bounds
  double sum_an = 0.0;   // independent re-summation of sum_n a_n (should be 1/2)

  long series_terms = 0;   // partial-sum length used for a1
  std::size_t table_len = 0;  // a_n / suffix tables cover n = 1..table_len

  // a_n values and suffix sums sum_{m>n} a_m^{2,4,6}; index n in [0, table_len].
  std::vector<double> an;
  std::vector<double> suffix2, suffix4, suffix6;

  // Master grid at gamma = 1: t_i = i*master_h for i = 0..N, N*master_h = master_T.
  double master_h = 0.0;
  double master_T = 0.0;
  std::vector<double> wgrid;  // w(t_i)
  std::vector<double> cumw;   // int_0^{t_i} w   (cumw.back() = 1/2 by calibration)
  std::vector<double> Wgrid;  // W_1(t_i) = int_{t_i}^inf w  (tail bound included)
  std::vector<double> cumW;   // int_0^{t_i} W_1

  double w_tail_beyond = 0.0;  // certified bound on int_{master_T}^inf w
  double W_tail_beyond = 0.0;  // certified bound on int_{master_T}^inf W_1
  double W_l1_gamma1 = 0.0;    // ||W_1||_1 = 2 int_0^inf t w(t) dt

  bool has_master = false;

  // Stretched-exponential tail bounds at gamma = 1 (valid for x >= e^9):
  //   int_x^inf w   <= (27/14) c e^4 (x/ln^2 x)^2 exp(-eta x/ln^2 x)
  //   int_x^inf W_1 <= (486/(49 eta)) c e^4 (x/ln^2 x)^3 exp(-eta x/ln^2 x)
  double tail_w_bound(double x) const;
  double tail_W_bound(double x) const;
};

// Computes a1 (partial sum to series_N plus midpoint integral tail), eta = 2 a1,
// the a_n/suffix tables, and -- when build_master is set -- the master grid, the
// calibration of c so that int w = 1, W_1, and the cumulative integrals.
// series_N must be >= 1e4.  Honors QLOC_CACHE_DIR for the master grid.
WeightTables make_weight_tables(long series_N = 10000000,
                                double quad_tol = 1e-9,
                                double master_h = 0.0625,
                                double master_T = 32000.0,
                                bool build_master = true);

// Process-wide singleton with default parameters; thread-safe initialization.
const WeightTables& weight_tables();

// w_gamma(t) = gamma * c * prod_n (sin(a_n gamma t)/(a_n gamma t))^2, evaluated
// with explicit factors while a_n|gamma t| is non-negligible (at least 1000
// factors) and the remaining log-product summed analytically through sixth
// order via the cached suffix sums.  Even in t; w_gamma(0) = gamma*c.
double w_eval(double t, double gamma, double prod_tol = 1e-12);

// W_gamma(x): 1/2 at x = 0, sgn(x) * int_{|x|}^inf w_gamma otherwise, read from
// the cumulative master table (cubic Hermite between nodes, derivative = -w).
// Odd; |W_gamma| <= 1/2.  Throws if the master-grid truncation cannot certify
// quad_tol at the requested point.
double W_eval(double x, double gamma, double quad_tol = 1e-9);

// ||W_gamma||_1 = W_l1_gamma1 / gamma.
double W_l1_norm(double gamma);

// Numeric tails (quadrature value plus certified remainder bound):
//   w_tail = int_x^inf w_gamma,  W_tail_integral = int_x^inf W_gamma(t) dt.
double w_tail(double x, double gamma);
double W_tail_integral(double x, double gamma);

// Subadditive, non-decreasing envelope argument:
//   f_b(x) = e^2/4 on [0, e^2/b],  b*x / ln^2(b*x)  beyond.
double f_sub_exp(double b, double x);

// Composite Filon quadrature for int_0^{(n-1)h} f(t) cos(kt) dt (resp. sin)
// from equally spaced samples f(0), f(h), ..., f((n-1)h); n must be odd.
double filon_cos_samples(const std::vector<double>& f, double h, double k);
double filon_sin_samples(const std::vector<double>& f, double h, double k);

// Cached weight samples on a Filon grid for one gamma, exposing the scalar
// Fourier-type integrals that drive the eigenbasis route of the weighted
// integral operators:
//   m_F(k) = 2 int_0^T cos(kt) w_gamma(t) dt      (= sqrt(2 pi) \hat w_gamma(k))
//   S(k)   = 2 int_0^T sin(kt) W_gamma(t) dt      (= 1/k for |k| >= gamma)
// m_F is even, S odd; the exactness identity k*S(k) = 1 - m_F(k) holds for all k.
struct FourierProbes {
  double gamma = 1.0;
  double T = 0.0;       // cutoff (default 8000/gamma)
  double h = 0.0;       // node spacing (default 0.0625/gamma, the master grid)
  std::vector<double> wsamp;  // w_gamma(i h)
  std::vector<double> Wsamp;  // W_gamma(i h)

  double m_F(double k) const;
  double S(double k) const;
};
FourierProbes make_fourier_probes(double gamma, double T = -1.0, double h = -1.0);

// Fourier-support audit: |\hat w_gamma| below tolerance outside [-gamma, gamma]
// (with 5% guard band), \hat w_gamma(0) = 1/(sqrt(2 pi)), and
// \hat W_gamma(k) = -i/(sqrt(2 pi) k) off the support.
struct FourierSupportAudit {
  double gamma = 1.0;
  double delta = 0.05;                // guard band fraction
  std::vector<double> k;              // audited frequencies (all >= gamma(1+delta))
  std::vector<double> what_abs;       // |\hat w_gamma(k)|
  std::vector<double> What_rel_err;   // | k*S(k) - 1 |  (relative error of the 1/k law)
  double at_zero_err = 0.0;           // | \hat w_gamma(0) - 1/sqrt(2 pi) |
  double max_outside = 0.0;
  double max_W_rel_err = 0.0;
  bool pass = false;
};
FourierSupportAudit fourier_support_audit(double gamma,
                                          const std::vector<double>& k_grid,
                                          double quad_T = -1.0);

// Tail-decay audit: at each sample x with gamma*x >= e^9, checks
//   int_x^inf w_gamma   <= (27/14) c e^4 f_gamma(x)^2 exp(-eta f_gamma(x))
//   int_x^inf W_gamma   <= (486/(49 gamma eta)) c e^4 f_gamma(x)^3 exp(-eta f_gamma(x))
// where f_gamma(x) = gamma x / ln^2(gamma x).
struct WeightDecayAudit {
  double gamma = 1.0;
  std::vector<BoundCheck> checks;
  bool pass = false;
};
WeightDecayAudit decay_audit(double gamma, const std::vector<double>& x_samples);

}  // namespace qlv
