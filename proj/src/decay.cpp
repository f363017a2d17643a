#include "qlv/decay.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qlv {

// ============================================================================
// Weight
// ============================================================================

double Weight::operator()(double r) const {
  if (r < 0) throw std::invalid_argument("Weight: negative argument");
  switch (kind) {
    case Kind::Zero:
      return 0.0;
    case Kind::Power:
      return a * std::pow(r, theta);
    case Kind::Log:
      return a * std::log1p(r);
    case Kind::CappedRatio: {
      const double ep = std::exp(p);
      const double x = b * r;
      if (x <= ep) return ep / std::pow(p, p);
      return x / std::pow(std::log(x), p);
    }
  }
  return 0.0;
}

Weight Weight::power(double a, double theta) {
  if (a < 0 || theta <= 0 || theta > 1)
    throw std::invalid_argument("Weight::power: need a >= 0, 0 < theta <= 1");
  Weight g;
  g.kind = Kind::Power;
  g.a = a;
  g.theta = theta;
  return g;
}

Weight Weight::log(double a) {
  Weight g;
  g.kind = Kind::Log;
  g.a = a;
  return g;
}

Weight Weight::capped_ratio(double b, double p) {
  if (b <= 0 || p < 1)
    throw std::invalid_argument("Weight::capped_ratio: need b > 0, p >= 1");
  Weight g;
  g.kind = Kind::CappedRatio;
  g.b = b;
  g.p = p;
  return g;
}

bool weight_is_admissible(const Weight& g, double rmax) {
  const int n = 64;
  double prev = g(0.0);
  if (prev < 0) return false;
  for (int i = 1; i <= n; ++i) {
    const double r = rmax * i / n;
    const double v = g(r);
    if (v < prev - 1e-12) return false;
    prev = v;
  }
  for (int i = 1; i <= n; ++i)
    for (int j = i; j <= n; ++j) {
      const double r = rmax * i / (2 * n), s = rmax * j / (2 * n);
      if (g(r + s) > g(r) + g(s) + 1e-9 * (1.0 + g(r) + g(s))) return false;
    }
  return true;
}

// ============================================================================
// DecayFunction
// ============================================================================

double DecayFunction::operator()(double r) const {
  if (r < 0) throw std::invalid_argument("DecayFunction: negative argument");
  switch (kind_) {
    case Kind::Power:
      return std::pow(1.0 + r, -p_);
    case Kind::Weighted:
      return std::exp(-weight_(r)) * (*base_)(r);
    case Kind::Tabulated: {
      // previous-value step interpolation
      auto it = std::upper_bound(grid_.begin(), grid_.end(), r);
      if (it == grid_.begin()) return values_.front();
      return values_[static_cast<size_t>(it - grid_.begin()) - 1];
    }
    case Kind::Transformed:
      return fn_(r);
  }
  return 0.0;
}

bool DecayFunction::has_power_base() const {
  if (kind_ == Kind::Power) return true;
  if (kind_ == Kind::Weighted) return base_->has_power_base();
  return false;
}

double DecayFunction::power_exponent() const {
  if (kind_ == Kind::Power) return p_;
  if (kind_ == Kind::Weighted) return base_->power_exponent();
  throw std::logic_error("DecayFunction: no power-law base");
}

DecayFunction DecayFunction::power(double p) {
  if (p <= 0) throw std::invalid_argument("DecayFunction::power: p <= 0");
  DecayFunction f;
  f.kind_ = Kind::Power;
  f.p_ = p;
  f.label_ = "(1+r)^-" + std::to_string(p);
  return f;
}

DecayFunction DecayFunction::weighted(DecayFunction base, Weight g) {
  DecayFunction f;
  f.kind_ = Kind::Weighted;
  f.base_ = std::make_shared<DecayFunction>(std::move(base));
  f.weight_ = g;
  f.label_ = "e^{-g} * " + f.base_->label();
  return f;
}

DecayFunction DecayFunction::tabulated(std::vector<double> grid,
                                       std::vector<double> values) {
  if (grid.size() != values.size() || grid.empty())
    throw std::invalid_argument("DecayFunction::tabulated: bad table");
  if (grid.front() != 0.0)
    throw std::invalid_argument("DecayFunction::tabulated: grid must start 0");
  for (size_t i = 1; i < grid.size(); ++i) {
    if (grid[i] <= grid[i - 1])
      throw std::invalid_argument("DecayFunction::tabulated: grid not sorted");
    if (values[i] > values[i - 1])
      throw std::invalid_argument("DecayFunction::tabulated: not decreasing");
  }
  for (double v : values)
    if (v <= 0)
      throw std::invalid_argument("DecayFunction::tabulated: values <= 0");
  DecayFunction f;
  f.kind_ = Kind::Tabulated;
  f.grid_ = std::move(grid);
  f.values_ = std::move(values);
  f.label_ = "tabulated";
  return f;
}

DecayFunction DecayFunction::transformed(std::function<double(double)> fn,
                                         std::string label) {
  DecayFunction f;
  f.kind_ = Kind::Transformed;
  f.fn_ = std::move(fn);
  f.label_ = std::move(label);
  return f;
}

DecayFunction weighted_f(const DecayFunction& F, const Weight& g) {
  if (!weight_is_admissible(g))
    throw std::invalid_argument("weighted_f: weight fails admissibility check");
  return DecayFunction::weighted(F, g);
}

// ============================================================================
// Constants
// ============================================================================

FConstants f_constants(const DecayFunction& F, const MetricSpace& G) {
  FConstants out;
  const int n = G.size();
  // Cache F on the finitely many distances that occur.
  Eigen::MatrixXd fv(n, n);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) fv(x, y) = F(G.dist(x, y));

  for (int x = 0; x < n; ++x) {
    const double s = fv.row(x).sum();
    if (s > out.uniform_norm) {
      out.uniform_norm = s;
      out.norm_arg = x;
    }
  }
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) {
      double s = 0.0;
      for (int z = 0; z < n; ++z) s += fv(x, z) * fv(z, y);
      s /= fv(x, y);
      if (s > out.conv_constant) {
        out.conv_constant = s;
        out.conv_arg_x = x;
        out.conv_arg_y = y;
      }
    }
  return out;
}

double f_uniform_norm(const DecayFunction& F, const MetricSpace& G) {
  return f_constants(F, G).uniform_norm;
}

double f_convolution_constant(const DecayFunction& F, const MetricSpace& G) {
  return f_constants(F, G).conv_constant;
}

// ============================================================================
// Moments
// ============================================================================

MomentResult moment(const DecayFunction& G, double p, double m,
                    long long truncation) {
  if (p < 0 || m < 0) throw std::invalid_argument("moment: need p, m >= 0");
  MomentResult out;
  const long long n0 = static_cast<long long>(std::floor(m));
  double last = -1.0;
  long long flat_streak = 0;
  for (long long n = n0; n <= n0 + truncation; ++n) {
    const double term =
        std::pow(1.0 + static_cast<double>(n), p) * G(static_cast<double>(n));
    out.value += term;
    ++out.terms;
    // Underflow: the summand is non-increasing, so nothing further matters.
    if (term < 1e-300) {
      out.tail = 0.0;
      return out;
    }
    // Early exit once terms stop mattering.
    if (term < 1e-17 * out.value && n > n0 + 16) {
      out.tail = term;  // everything beyond is below roundoff of the sum
      return out;
    }
    // Divergence guard: terms non-decreasing over a long stretch.
    if (term >= last) {
      if (++flat_streak > truncation / 10 + 100)
        throw std::runtime_error("moment: series appears divergent");
    } else {
      flat_streak = 0;
    }
    last = term;
  }
  // Integral-comparison tail estimate for a non-increasing summand.
  const double nN = static_cast<double>(n0 + truncation);
  const double gN = G(nN);
  const double gN1 = G(nN - 1.0);
  const double ratio = gN1 > 0 ? std::min(gN / gN1, 0.999999) : 0.0;
  out.tail = std::pow(1.0 + nN, p) * gN / (1.0 - ratio);
  return out;
}

// ============================================================================
// Transforms
// ============================================================================

TransformResult transform_step(const DecayFunction& F, double a, double c,
                               const MetricSpace& G, double nu, double kappa) {
  if (c < F(a)) throw std::invalid_argument("transform_step: need c >= F(a)");
  TransformResult out;
  DecayFunction base = F;
  out.fn = DecayFunction::transformed(
      [base, a, c](double r) { return r <= a ? c : base(r); }, "step");
  const FConstants k = f_constants(F, G);
  // kappa * max(a,1)^nu bounds |b_x(a)| for every radius, including a < 1
  // where the closed ball is the single site.
  out.norm_bound = c * kappa * std::pow(std::max(a, 1.0), nu) + k.uniform_norm;
  out.conv_bound =
      std::max(c, F(0.0)) * c * k.conv_constant / (F(a) * F(a));
  return out;
}

TransformResult transform_dilate(const DecayFunction& F, double eps,
                                 const MetricSpace& G) {
  if (eps <= 0) throw std::invalid_argument("transform_dilate: eps <= 0");
  if (!F.has_power_base())
    throw std::invalid_argument("transform_dilate: F must be e^{-g}(1+r)^-p");
  const double p = F.power_exponent();
  if (p < 1)
    throw std::invalid_argument("transform_dilate: power exponent must be >=1");
  TransformResult out;
  DecayFunction base = F;
  out.fn = DecayFunction::transformed(
      [base, eps](double r) { return base(eps * r); }, "dilate");
  const double f0_norm = f_uniform_norm(DecayFunction::power(p), G);
  out.norm_bound = std::max(1.0, std::pow(eps, -p)) * f0_norm;
  const double ftilde_norm = f_uniform_norm(out.fn, G);
  out.conv_bound = std::pow(2.0, p) * ftilde_norm;
  return out;
}

TransformResult transform_shift(const DecayFunction& F, double a,
                                const MetricSpace& G) {
  if (a < 0) throw std::invalid_argument("transform_shift: a < 0");
  TransformResult out;
  DecayFunction base = F;
  out.fn = DecayFunction::transformed(
      [base, a](double r) { return r <= a ? base(0.0) : base(r - a); },
      "shift");
  const FConstants k = f_constants(F, G);
  const double factor = std::max(1.0, F(0.0)) / F(a);
  out.norm_bound = factor * k.uniform_norm;
  out.conv_bound = factor * factor * k.conv_constant;
  return out;
}

}  // namespace qlv
