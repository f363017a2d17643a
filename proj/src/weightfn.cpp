#include "qlv/weightfn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>

namespace qlv {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kE9 = 8103.083927575384;  // e^9
// Explicit-factor cutoff for the product: factors with a_n|t| below this are
// folded into the analytic log-tail (accurate through sixth order).
constexpr double kFactorThreshold = 0.05;
constexpr std::size_t kMinFactors = 1000;

double sq(double x) { return x * x; }

// sum_{n=2}^{N} 1/(n ln^2 n) with compensated summation, plus the midpoint
// integral tail  int_{N+1/2}^inf dt/(t ln^2 t) = 1/ln(N+1/2).
double harmonic_log_series(long N) {
  double sum = 0.0, comp = 0.0;
  for (long n = 2; n <= N; ++n) {
    const double term = 1.0 / (static_cast<double>(n) * sq(std::log(static_cast<double>(n))));
    const double y = term - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum + 1.0 / std::log(static_cast<double>(N) + 0.5);
}

double a_of_n(double a1, std::size_t n) {
  if (n == 1) return a1;
  return a1 / (static_cast<double>(n) * sq(std::log(static_cast<double>(n))));
}

// Raw (un-normalized) product  prod_n (sin(a_n x)/(a_n x))^2  at x >= 0.
double raw_product(const WeightTables& T, double x, double thresh) {
  if (x == 0.0) return 1.0;
  double prod = 1.0;
  std::size_t n = 1;
  const std::size_t L = T.table_len;
  while (true) {
    const double an = (n <= L) ? T.an[n] : a_of_n(T.a1, n);
    const double arg = an * x;
    if (arg < thresh && n > kMinFactors) break;
    double s;
    if (arg < 1e-8) {
      s = 1.0 - arg * arg / 6.0;
    } else {
      s = std::sin(arg) / arg;
    }
    if (s == 0.0) return 0.0;
    prod *= s * s;
    if (prod < 1e-300) return 0.0;
    ++n;
  }
  // Remaining factors m >= n: 2 ln sinc(a_m x) = -(a_m x)^2/3 - (a_m x)^4/90
  // - 2 (a_m x)^6 / 2835 - O((a_m x)^8), summed via the suffix tables.
  double s2, s4, s6;
  const std::size_t last = n - 1;  // last explicitly included index
  if (last <= L) {
    s2 = T.suffix2[last];
    s4 = T.suffix4[last];
    s6 = T.suffix6[last];
  } else {
    // Integral estimates (only reachable for x far beyond the master range).
    const double ln4 = sq(sq(std::log(static_cast<double>(last))));
    s2 = sq(T.a1) / (static_cast<double>(last) * ln4);
    s4 = 0.0;
    s6 = 0.0;
  }
  const double x2 = x * x;
  const double logtail = -(x2 / 3.0) * s2 - (x2 * x2 / 90.0) * s4 -
                         (2.0 * x2 * x2 * x2 / 2835.0) * s6;
  return prod * std::exp(logtail);
}

// Cumulative integral of samples f_i on a uniform grid with even interval
// count: composite Simpson at even nodes, fourth-order closed correction at
// odd nodes.  C[0] = 0.
std::vector<double> cumulative_integral(const std::vector<double>& f, double h) {
  const std::size_t N = f.size();
  std::vector<double> C(N, 0.0);
  for (std::size_t i = 2; i < N; i += 2) {
    C[i] = C[i - 2] + (h / 3.0) * (f[i - 2] + 4.0 * f[i - 1] + f[i]);
  }
  for (std::size_t i = 1; i < N; i += 2) {
    if (i + 1 < N) {
      C[i] = C[i - 1] + (h / 12.0) * (5.0 * f[i - 1] + 8.0 * f[i] - f[i + 1]);
    } else {
      C[i] = C[i - 1] + (h / 12.0) * (5.0 * f[i] + 8.0 * f[i - 1] - f[i - 2]) ;
    }
  }
  return C;
}

// Cubic Hermite read of a cumulative table C with known derivative samples d
// (d_i = C'(t_i)) on the uniform grid of spacing h.
double hermite_read(const std::vector<double>& C, const std::vector<double>& d,
                    double h, double x) {
  const std::size_t N = C.size();
  if (x <= 0.0) return C.front();
  const double xmax = h * static_cast<double>(N - 1);
  if (x >= xmax) return C.back();
  std::size_t i = static_cast<std::size_t>(x / h);
  if (i >= N - 1) i = N - 2;
  const double u = x / h - static_cast<double>(i);
  const double u2 = u * u, u3 = u2 * u;
  const double h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
  const double h10 = u3 - 2.0 * u2 + u;
  const double h01 = -2.0 * u3 + 3.0 * u2;
  const double h11 = u3 - u2;
  return h00 * C[i] + h * h10 * d[i] + h01 * C[i + 1] + h * h11 * d[i + 1];
}

std::string cache_path(long series_N, double h, double T) {
  const char* dir = std::getenv("QLOC_CACHE_DIR");
  std::string base;
  if (dir != nullptr && *dir != '\0') {
    base = dir;
  } else {
    // Fall back to a per-user cache under the system temp directory so that
    // repeated processes (test binaries, CLI runs) share the master tables.
    std::error_code ec;
    auto tmp = std::filesystem::temp_directory_path(ec);
    if (ec) return std::string();
    auto p = tmp / "qlv-weight-cache";
    std::filesystem::create_directories(p, ec);
    if (ec) return std::string();
    base = p.string();
  }
  std::ostringstream oss;
  oss << base << "/weight_master_v1_" << series_N << "_" << static_cast<long>(h * 1e6)
      << "_" << static_cast<long>(T) << ".bin";
  return oss.str();
}

bool load_master_cache(WeightTables& T, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::uint64_t magic = 0, n = 0;
  in.read(reinterpret_cast<char*>(&magic), sizeof magic);
  if (!in || magic != 0x514c565757454947ULL) return false;
  double a1 = 0.0;
  in.read(reinterpret_cast<char*>(&a1), sizeof a1);
  if (!in || a1 != T.a1) return false;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || n == 0 || n > (1u << 26)) return false;
  T.wgrid.resize(n);
  in.read(reinterpret_cast<char*>(T.wgrid.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  in.read(reinterpret_cast<char*>(&T.c), sizeof T.c);
  return static_cast<bool>(in);
}

void store_master_cache(const WeightTables& T, const std::string& path) {
  // Write to a temporary file and rename so concurrent readers never see a
  // partially written table.
  const std::string tmp = path + ".tmp";
  std::ofstream out(tmp, std::ios::binary);
  if (!out) return;
  const std::uint64_t magic = 0x514c565757454947ULL;
  const std::uint64_t n = T.wgrid.size();
  out.write(reinterpret_cast<const char*>(&magic), sizeof magic);
  out.write(reinterpret_cast<const char*>(&T.a1), sizeof T.a1);
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(T.wgrid.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
  out.write(reinterpret_cast<const char*>(&T.c), sizeof T.c);
  out.close();
  if (out) {
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) std::filesystem::remove(tmp, ec);
  }
}

}  // namespace

double WeightTables::tail_w_bound(double x) const {
  if (x < kE9) throw std::invalid_argument("tail_w_bound: requires x >= e^9");
  const double f = x / sq(std::log(x));
  return (27.0 / 14.0) * c * std::exp(4.0) * f * f * std::exp(-eta * f);
}

double WeightTables::tail_W_bound(double x) const {
  if (x < kE9) throw std::invalid_argument("tail_W_bound: requires x >= e^9");
  const double f = x / sq(std::log(x));
  return (486.0 / (49.0 * eta)) * c * std::exp(4.0) * f * f * f * std::exp(-eta * f);
}

WeightTables make_weight_tables(long series_N, double quad_tol, double master_h,
                                double master_T, bool build_master) {
  if (series_N < 10000) {
    throw std::invalid_argument("make_weight_tables: series_N must be >= 1e4");
  }
  if (master_h <= 0.0 || master_T <= master_h) {
    throw std::invalid_argument("make_weight_tables: bad master grid parameters");
  }
  WeightTables T;
  T.series_terms = series_N;
  const double S = harmonic_log_series(series_N);
  T.a1 = 0.5 / (1.0 + S);
  T.eta = 2.0 * T.a1;

  // a_n and suffix sums over a table long enough that every argument within
  // the master range resolves its factor cutoff inside the table.
  const std::size_t L = 200000;
  T.table_len = L;
  T.an.assign(L + 1, 0.0);
  for (std::size_t n = 1; n <= L; ++n) T.an[n] = a_of_n(T.a1, n);
  T.suffix2.assign(L + 1, 0.0);
  T.suffix4.assign(L + 1, 0.0);
  T.suffix6.assign(L + 1, 0.0);
  const double ln4L = sq(sq(std::log(static_cast<double>(L))));
  T.suffix2[L] = sq(T.a1) / (static_cast<double>(L) * ln4L);  // integral tail
  for (std::size_t n = L; n-- > 1;) {
    const double a = T.an[n + 1];
    T.suffix2[n] = T.suffix2[n + 1] + a * a;
    T.suffix4[n] = T.suffix4[n + 1] + a * a * a * a;
    T.suffix6[n] = T.suffix6[n + 1] + a * a * a * a * a * a;
  }
  T.suffix2[0] = T.suffix2[1] + sq(T.an[1]);
  T.suffix4[0] = T.suffix4[1] + sq(sq(T.an[1]));
  T.suffix6[0] = T.suffix6[1] + sq(T.an[1]) * sq(sq(T.an[1]));

  // Independent re-summation of sum a_n (trapezoid tail instead of midpoint).
  {
    double s = 0.0;
    const long M = 2000000;
    for (long n = 2; n <= M; ++n) s += 1.0 / (static_cast<double>(n) * sq(std::log(static_cast<double>(n))));
    s += 1.0 / std::log(static_cast<double>(M)) -
         0.5 / (static_cast<double>(M) * sq(std::log(static_cast<double>(M))));
    T.sum_an = T.a1 * (1.0 + s);
  }

  if (!build_master) return T;

  T.master_h = master_h;
  T.master_T = master_T;
  std::size_t Nint = static_cast<std::size_t>(std::llround(master_T / master_h));
  if (Nint % 2 == 1) ++Nint;
  T.master_T = master_h * static_cast<double>(Nint);
  const std::size_t Npts = Nint + 1;

  const std::string cpath = cache_path(series_N, master_h, T.master_T);
  bool loaded = false;
  if (!cpath.empty()) {
    loaded = load_master_cache(T, cpath);
    if (loaded && T.wgrid.size() != Npts) { loaded = false; T.wgrid.clear(); }
  }
  if (!loaded) {
    // Raw product on the grid, in parallel (entries independent, so the
    // result is identical regardless of thread count).
    std::vector<double> p(Npts, 0.0);
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned nthreads = std::min<unsigned>(8, hw);
    std::vector<std::thread> workers;
    const std::size_t chunk = (Npts + nthreads - 1) / nthreads;
    for (unsigned w = 0; w < nthreads; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(Npts, lo + chunk);
      if (lo >= hi) break;
      workers.emplace_back([&T, &p, lo, hi, master_h]() {
        for (std::size_t i = lo; i < hi; ++i) {
          p[i] = raw_product(T, master_h * static_cast<double>(i), kFactorThreshold);
        }
      });
    }
    for (auto& w : workers) w.join();
    // Calibrate c so that int_R w = 2 * c * int_0^inf (product) = 1.
    std::vector<double> cum = cumulative_integral(p, master_h);
    T.c = 1.0 / (2.0 * cum.back());
    T.wgrid.resize(Npts);
    for (std::size_t i = 0; i < Npts; ++i) T.wgrid[i] = T.c * p[i];
    if (!cpath.empty()) store_master_cache(T, cpath);
  }

  T.cumw = cumulative_integral(T.wgrid, master_h);
  T.w_tail_beyond = T.tail_w_bound(T.master_T);
  T.W_tail_beyond = T.tail_W_bound(T.master_T);
  const double half = T.cumw.back();  // = 1/2 by calibration
  T.Wgrid.resize(Npts);
  for (std::size_t i = 0; i < Npts; ++i) {
    T.Wgrid[i] = std::max(0.0, half + T.w_tail_beyond - T.cumw[i]);
  }
  T.cumW = cumulative_integral(T.Wgrid, master_h);

  std::vector<double> tw(Npts);
  for (std::size_t i = 0; i < Npts; ++i) {
    tw[i] = master_h * static_cast<double>(i) * T.wgrid[i];
  }
  T.W_l1_gamma1 = 2.0 * cumulative_integral(tw, master_h).back();

  if (T.w_tail_beyond > quad_tol) {
    throw std::runtime_error("make_weight_tables: master grid too short for quad_tol");
  }
  T.has_master = true;
  return T;
}

const WeightTables& weight_tables() {
  static const WeightTables tables = make_weight_tables();
  return tables;
}

double w_eval(double t, double gamma, double prod_tol) {
  if (gamma <= 0.0) throw std::invalid_argument("w_eval: gamma must be positive");
  const WeightTables& T = weight_tables();
  const double x = std::abs(gamma * t);
  // Per-factor neglected eighth-order term ~ arg^8/18900; honor a tighter
  // prod_tol by shrinking the explicit-factor cutoff.
  double thresh = kFactorThreshold;
  if (prod_tol > 0.0) {
    thresh = std::min(thresh, std::pow(18900.0 * prod_tol, 0.125));
  }
  return gamma * T.c * raw_product(T, x, thresh);
}

double W_eval(double x, double gamma, double quad_tol) {
  if (gamma <= 0.0) throw std::invalid_argument("W_eval: gamma must be positive");
  const WeightTables& T = weight_tables();
  if (!T.has_master) throw std::runtime_error("W_eval: master tables unavailable");
  if (x == 0.0) return 0.5;
  const double sgn = (x > 0.0) ? 1.0 : -1.0;
  const double y = gamma * std::abs(x);
  if (y >= T.master_T) {
    if (T.w_tail_beyond > quad_tol) {
      throw std::runtime_error("W_eval: truncation tail exceeds quad_tol");
    }
    return sgn * T.w_tail_beyond;  // certified bound on a value below 1e-30
  }
  const double half = T.cumw.back();
  const double val = half + T.w_tail_beyond - hermite_read(T.cumw, T.wgrid, T.master_h, y);
  return sgn * std::max(0.0, std::min(0.5, val));
}

double W_l1_norm(double gamma) {
  if (gamma <= 0.0) throw std::invalid_argument("W_l1_norm: gamma must be positive");
  return weight_tables().W_l1_gamma1 / gamma;
}

double w_tail(double x, double gamma) {
  if (x < 0.0) throw std::invalid_argument("w_tail: x must be non-negative");
  return (x == 0.0) ? 0.5 : W_eval(x, gamma);
}

double W_tail_integral(double x, double gamma) {
  if (gamma <= 0.0) throw std::invalid_argument("W_tail_integral: gamma must be positive");
  if (x < 0.0) throw std::invalid_argument("W_tail_integral: x must be non-negative");
  const WeightTables& T = weight_tables();
  if (!T.has_master) throw std::runtime_error("W_tail_integral: master tables unavailable");
  const double y = gamma * x;
  if (y >= T.master_T) return T.W_tail_beyond / gamma;
  const double total = T.cumW.back() + T.W_tail_beyond;
  return (total - hermite_read(T.cumW, T.Wgrid, T.master_h, y)) / gamma;
}

double f_sub_exp(double b, double x) {
  if (b <= 0.0) throw std::invalid_argument("f_sub_exp: b must be positive");
  const double e2 = std::exp(2.0);
  if (x <= e2 / b) return e2 / 4.0;
  return b * x / sq(std::log(b * x));
}

namespace {

struct FilonCoeffs {
  double alpha, beta, gam;
};

FilonCoeffs filon_coeffs(double theta) {
  FilonCoeffs fc{};
  const double th = theta;
  if (std::abs(th) < 0.1) {
    const double t2 = th * th;
    fc.alpha = th * t2 * (2.0 / 45.0 + t2 * (-2.0 / 315.0 + t2 * (2.0 / 4725.0)));
    fc.beta = 2.0 / 3.0 + t2 * (2.0 / 15.0 + t2 * (-4.0 / 105.0 + t2 * (2.0 / 567.0)));
    fc.gam = 4.0 / 3.0 + t2 * (-2.0 / 15.0 + t2 * (1.0 / 210.0 + t2 * (-1.0 / 11340.0)));
    return fc;
  }
  const double s = std::sin(th), co = std::cos(th);
  const double t2 = th * th, t3 = t2 * th;
  fc.alpha = (t2 + th * s * co - 2.0 * s * s) / t3;
  fc.beta = 2.0 * (th * (1.0 + co * co) - 2.0 * s * co) / t3;
  fc.gam = 4.0 * (s - th * co) / t3;
  return fc;
}

void filon_sums(const std::vector<double>& f, double h, double k, double* Ce,
                double* Co, double* Se, double* So) {
  const std::size_t N = f.size();
  double ce = 0.0, co = 0.0, se = 0.0, so = 0.0;
  // Rotation recurrence for cos/sin(k t_i), re-anchored with exact values
  // every 512 nodes to keep the phase drift below ~1e-13.
  const double cs = std::cos(k * h), sn = std::sin(k * h);
  double c = 1.0, s = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    if (i % 512 == 0) {
      const double t = h * static_cast<double>(i);
      c = std::cos(k * t);
      s = std::sin(k * t);
    }
    if (i % 2 == 0) {
      ce += f[i] * c;
      se += f[i] * s;
    } else {
      co += f[i] * c;
      so += f[i] * s;
    }
    const double cn = c * cs - s * sn;
    s = c * sn + s * cs;
    c = cn;
  }
  const double tN = h * static_cast<double>(N - 1);
  ce -= 0.5 * (f.front() * 1.0 + f.back() * std::cos(k * tN));
  se -= 0.5 * (f.front() * 0.0 + f.back() * std::sin(k * tN));
  *Ce = ce;
  *Co = co;
  *Se = se;
  *So = so;
}

}  // namespace

double filon_cos_samples(const std::vector<double>& f, double h, double k) {
  if (f.size() < 3 || f.size() % 2 == 0) {
    throw std::invalid_argument("filon_cos_samples: need an odd number (>= 3) of samples");
  }
  const double ka = std::abs(k);  // cosine integral is even in k
  const FilonCoeffs fc = filon_coeffs(ka * h);
  double Ce, Co, Se, So;
  filon_sums(f, h, ka, &Ce, &Co, &Se, &So);
  const double tN = h * static_cast<double>(f.size() - 1);
  return h * (fc.alpha * (f.back() * std::sin(ka * tN) - f.front() * 0.0) +
              fc.beta * Ce + fc.gam * Co);
}

double filon_sin_samples(const std::vector<double>& f, double h, double k) {
  if (f.size() < 3 || f.size() % 2 == 0) {
    throw std::invalid_argument("filon_sin_samples: need an odd number (>= 3) of samples");
  }
  const double sgn = (k < 0.0) ? -1.0 : 1.0;  // sine integral is odd in k
  const double ka = std::abs(k);
  const FilonCoeffs fc = filon_coeffs(ka * h);
  double Ce, Co, Se, So;
  filon_sums(f, h, ka, &Ce, &Co, &Se, &So);
  const double tN = h * static_cast<double>(f.size() - 1);
  return sgn * h * (fc.alpha * (f.front() * 1.0 - f.back() * std::cos(ka * tN)) +
                    fc.beta * Se + fc.gam * So);
}

double FourierProbes::m_F(double k) const {
  return 2.0 * filon_cos_samples(wsamp, h, k);
}

double FourierProbes::S(double k) const {
  return 2.0 * filon_sin_samples(Wsamp, h, k);
}

FourierProbes make_fourier_probes(double gamma, double T, double h) {
  if (gamma <= 0.0) throw std::invalid_argument("make_fourier_probes: gamma must be positive");
  FourierProbes P;
  P.gamma = gamma;
  P.T = (T > 0.0) ? T : 8000.0 / gamma;
  P.h = (h > 0.0) ? h : 0.0625 / gamma;
  std::size_t Nint = static_cast<std::size_t>(std::llround(P.T / P.h));
  if (Nint % 2 == 1) ++Nint;
  if (Nint < 2) Nint = 2;
  P.T = P.h * static_cast<double>(Nint);
  const std::size_t Npts = Nint + 1;
  P.wsamp.resize(Npts);
  P.Wsamp.resize(Npts);
  for (std::size_t i = 0; i < Npts; ++i) {
    const double t = P.h * static_cast<double>(i);
    P.wsamp[i] = w_eval(t, gamma);
    P.Wsamp[i] = W_eval(t, gamma);
  }
  P.Wsamp[0] = 0.5;  // W_gamma(0) = 1/2 exactly
  return P;
}

FourierSupportAudit fourier_support_audit(double gamma,
                                          const std::vector<double>& k_grid,
                                          double quad_T) {
  FourierSupportAudit A;
  A.gamma = gamma;
  const double kmin = gamma * (1.0 + A.delta);
  for (double k : k_grid) {
    if (std::abs(k) < kmin) {
      throw std::invalid_argument(
          "fourier_support_audit: k grid must avoid (-gamma(1+delta), gamma(1+delta))");
    }
  }
  const FourierProbes P = make_fourier_probes(gamma, quad_T);
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * kPi);
  A.at_zero_err = std::abs(inv_sqrt_2pi * P.m_F(0.0) - inv_sqrt_2pi);
  A.k = k_grid;
  for (double k : k_grid) {
    const double what = inv_sqrt_2pi * P.m_F(k);  // \hat w_gamma(k), real and even
    A.what_abs.push_back(std::abs(what));
    A.What_rel_err.push_back(std::abs(k * P.S(k) - 1.0));
  }
  A.max_outside = A.what_abs.empty()
                      ? 0.0
                      : *std::max_element(A.what_abs.begin(), A.what_abs.end());
  A.max_W_rel_err = A.What_rel_err.empty()
                        ? 0.0
                        : *std::max_element(A.What_rel_err.begin(), A.What_rel_err.end());
  A.pass = A.max_outside <= 1e-4 && A.at_zero_err <= 1e-6 && A.max_W_rel_err <= 1e-4;
  return A;
}

WeightDecayAudit decay_audit(double gamma, const std::vector<double>& x_samples) {
  if (gamma <= 0.0) throw std::invalid_argument("decay_audit: gamma must be positive");
  const WeightTables& T = weight_tables();
  WeightDecayAudit A;
  A.gamma = gamma;
  const double e4 = std::exp(4.0);
  for (double x : x_samples) {
    const double y = gamma * x;
    if (y < kE9) {
      throw std::invalid_argument("decay_audit: requires gamma*x >= e^9 for each sample");
    }
    const double f = y / sq(std::log(y));
    const double decay = std::exp(-T.eta * f);
    char label[96];
    BoundCheck cw;
    std::snprintf(label, sizeof label, "w_tail(x=%.6g)", x);
    cw.what = label;
    cw.lhs = w_tail(x, gamma);
    cw.rhs = (27.0 / 14.0) * T.c * e4 * f * f * decay;
    A.checks.push_back(cw);
    BoundCheck cW;
    std::snprintf(label, sizeof label, "W_tail_integral(x=%.6g)", x);
    cW.what = label;
    cW.lhs = W_tail_integral(x, gamma);
    cW.rhs = (486.0 / (49.0 * gamma * T.eta)) * T.c * e4 * f * f * f * decay;
    A.checks.push_back(cW);
  }
  A.pass = true;
  for (const BoundCheck& c : A.checks) A.pass = A.pass && c.pass();
  return A;
}

}  // namespace qlv
