#pragma once

// ============================================================================
// decay: F-functions and weights.
//
// A DecayFunction is a positive, non-increasing function on [0, infinity).
// The two defining constants on a finite metric space are
//     uniform norm  ||F||  = sup_x sum_y F(d(x,y))
//     convolution   C_F    = max_{x,y} sum_z F(d(x,z)) F(d(z,y)) / F(d(x,y))
// both computed exactly by enumeration.
// ============================================================================

#include "qlv/lattice.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace qlv {

// ============================================================================
// Weight g: non-negative, non-decreasing, subadditive.
// ============================================================================

struct Weight {
  enum class Kind { Zero, Power, Log, CappedRatio };
  Kind kind = Kind::Zero;
  double a = 1.0;      // overall scale (power: a*r^theta, log: a*ln(1+r))
  double theta = 1.0;  // power exponent, 0 < theta <= 1
  double b = 1.0;      // capped-ratio rate
  double p = 2.0;      // capped-ratio log power

  double operator()(double r) const;

  static Weight zero() { return {}; }
  static Weight power(double a, double theta = 1.0);
  static Weight log(double a = 1.0);
  // g(x) = e^p / p^p for b*x <= e^p, else (b*x) / ln(b*x)^p.
  static Weight capped_ratio(double b, double p = 2.0);
};

// Checks g(r+s) <= g(r) + g(s), g non-decreasing, g >= 0 on a sample grid.
bool weight_is_admissible(const Weight& g, double rmax = 200.0);

// ============================================================================
// DecayFunction
// ============================================================================

class DecayFunction {
 public:
  enum class Kind { Power, Weighted, Tabulated, Transformed };

  double operator()(double r) const;
  Kind kind() const { return kind_; }

  // Exponent of the underlying power law (1+r)^{-p}, when there is one.
  bool has_power_base() const;
  double power_exponent() const;
  // Weight of the outermost Weighted layer (Zero otherwise).
  const Weight& weight() const { return weight_; }

  // F(r) = (1+r)^{-p}.
  static DecayFunction power(double p);
  // F_g(r) = e^{-g(r)} F(r).
  static DecayFunction weighted(DecayFunction base, Weight g);
  // Step interpolation by previous value (keeps the function non-increasing).
  static DecayFunction tabulated(std::vector<double> grid,
                                 std::vector<double> values);
  // Arbitrary closure (used by the transform propositions).
  static DecayFunction transformed(std::function<double(double)> fn,
                                   std::string label);

  const std::string& label() const { return label_; }

 private:
  DecayFunction() = default;
  Kind kind_ = Kind::Power;
  double p_ = 2.0;
  std::shared_ptr<const DecayFunction> base_;
  Weight weight_;
  std::vector<double> grid_, values_;
  std::function<double(double)> fn_;
  std::string label_;
};

// F_g = e^{-g} F; throws if a subadditivity/monotonicity sample check fails.
DecayFunction weighted_f(const DecayFunction& F, const Weight& g);

// ============================================================================
// Constants on a finite space.
// ============================================================================

struct FConstants {
  double uniform_norm = 0.0;
  int norm_arg = -1;  // maximizing site x
  double conv_constant = 0.0;
  int conv_arg_x = -1, conv_arg_y = -1;
};

double f_uniform_norm(const DecayFunction& F, const MetricSpace& G);
double f_convolution_constant(const DecayFunction& F, const MetricSpace& G);
FConstants f_constants(const DecayFunction& F, const MetricSpace& G);

// ============================================================================
// Moments: M_p^G(m) = sum_{n=floor(m)}^infinity (1+n)^p G(n).
// ============================================================================

struct MomentResult {
  double value = 0.0;  // truncated sum
  double tail = 0.0;   // estimate of what lies beyond the truncation
  long long terms = 0;
};

MomentResult moment(const DecayFunction& G, double p, double m,
                    long long truncation = 1000000);

// ============================================================================
// Transform propositions (each returns the new function together with the
// closed-form bounds on its constants; brute constants must respect them).
// ============================================================================

struct TransformResult {
  DecayFunction fn = DecayFunction::power(1.0);
  double norm_bound = 0.0;  // bound on ||F~||
  double conv_bound = 0.0;  // bound on C_{F~}
};

// F~ = c on [0,a], F on (a,infinity); needs c >= F(a).
// Bounds: ||F~|| <= c*kappa*a^nu + ||F||,  C_{F~} <= max(c,F(0)) c C_F / F(a)^2.
TransformResult transform_step(const DecayFunction& F, double a, double c,
                               const MetricSpace& G, double nu, double kappa);

// Dilation F~(r) = F(eps r) for F = e^{-g}(1+r)^{-p}, p >= 1.
// Bounds: ||F~|| <= max(1, eps^{-p}) ||F_0||  (F_0 the unweighted power base),
//         C_{F~} <= 2^p ||F~||  (both uniform norms brute on G).
TransformResult transform_dilate(const DecayFunction& F, double eps,
                                 const MetricSpace& G);

// Shift F~ = F(0) on [0,a], F(r-a) beyond.
// Bounds: ||F~|| <= (max(1,F(0))/F(a)) ||F||,
//         C_{F~} <= (max(1,F(0))/F(a))^2 C_F.
TransformResult transform_shift(const DecayFunction& F, double a,
                                const MetricSpace& G);

}  // namespace qlv
