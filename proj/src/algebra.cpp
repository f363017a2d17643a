#include "qlv/algebra.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qlv {

// ============================================================================
// HilbertStructure
// ============================================================================

HilbertStructure::HilbertStructure(SiteSet volume, int default_dim,
                                   std::map<int, int> dims, long long dim_cap)
    : volume_(std::move(volume)),
      default_dim_(default_dim),
      dims_(std::move(dims)) {
  if (default_dim_ < 2)
    throw std::invalid_argument("HilbertStructure: local dim must be >= 2");
  long long d = 1;
  for (int x : volume_) {
    d *= site_dim(x);
    if (d > dim_cap)
      throw std::length_error("HilbertStructure: dimension cap exceeded");
  }
}

int HilbertStructure::site_dim(int x) const {
  auto it = dims_.find(x);
  return it == dims_.end() ? default_dim_ : it->second;
}

long long HilbertStructure::dim(const SiteSet& X) const {
  long long d = 1;
  for (int x : X) d *= site_dim(x);
  return d;
}

// ============================================================================
// Tensor plumbing
// ============================================================================

Mat kron(const Mat& A, const Mat& B) {
  Mat out(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return out;
}

namespace {

// For each basis index of the sites in `part` (in global order), the offset
// it contributes to the basis index of `whole`.
std::vector<long long> part_offsets(const SiteSet& part, const SiteSet& whole,
                                    const HilbertStructure& H) {
  // global strides inside `whole`
  std::map<int, long long> stride;
  long long s = 1;
  for (auto it = whole.rbegin(); it != whole.rend(); ++it) {
    stride[*it] = s;
    s *= H.site_dim(*it);
  }
  const long long dpart = H.dim(part);
  std::vector<long long> off(static_cast<size_t>(dpart), 0);
  std::vector<int> digits(part.size(), 0);
  for (long long i = 0; i < dpart; ++i) {
    long long o = 0;
    for (size_t k = 0; k < part.size(); ++k) o += digits[k] * stride[part[k]];
    off[static_cast<size_t>(i)] = o;
    for (int k = static_cast<int>(part.size()) - 1; k >= 0; --k) {
      if (++digits[k] < H.site_dim(part[k])) break;
      digits[k] = 0;
    }
  }
  return off;
}

}  // namespace

LocalOperator embed(const LocalOperator& A, const SiteSet& volume,
                    const HilbertStructure& H) {
  if (!is_subset(A.support, volume))
    throw std::domain_error("embed: support not contained in volume");
  if (A.support == volume) return A;
  const SiteSet comp = set_difference(volume, A.support);
  const auto soff = part_offsets(A.support, volume, H);
  const auto coff = part_offsets(comp, volume, H);
  const long long dX = H.dim(A.support), dC = H.dim(comp);
  if (A.matrix.rows() != dX)
    throw std::invalid_argument("embed: matrix does not match support dims");
  Mat out = Mat::Zero(dX * dC, dX * dC);
  for (long long i = 0; i < dX; ++i)
    for (long long j = 0; j < dX; ++j) {
      const cd v = A.matrix(i, j);
      if (v == cd(0.0, 0.0)) continue;
      for (long long c = 0; c < dC; ++c)
        out(soff[i] + coff[c], soff[j] + coff[c]) = v;
    }
  return {volume, std::move(out)};
}

double opnorm(const Mat& A) {
  if (A.rows() == 0 || A.cols() == 0) return 0.0;
  if (A.rows() <= 16 || A.rows() != A.cols())
    return A.jacobiSvd().singularValues()(0);
  if (A.rows() <= 1200) {
    // sqrt of the top eigenvalue of A^dagger A (much faster than a full SVD
    // at these sizes, and immune to power-iteration stalls on
    // near-degenerate spectra)
    Eigen::SelfAdjointEigenSolver<Mat> es(A.adjoint() * A,
                                          Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
  }
  // power iteration on A^dagger A with deterministic start
  Vec v(A.cols());
  for (Eigen::Index i = 0; i < A.cols(); ++i)
    v(i) = cd(1.0 + 0.381966 * std::sin(0.7 * (i + 1)),
              0.236068 * std::cos(1.3 * (i + 1)));
  v.normalize();
  double val = 0.0, prev = -1.0;
  int stable = 0;
  for (int iter = 0; iter < 2000; ++iter) {
    Vec w = A * v;
    val = w.norm();
    if (val == 0.0) return 0.0;
    Vec u = A.adjoint() * w;
    v = u / u.norm();
    if (std::abs(val - prev) <= 1e-13 * std::max(val, 1.0)) {
      if (++stable >= 3) return val;
    } else {
      stable = 0;
    }
    prev = val;
  }
  // slow convergence (near-degenerate top singular values): exact fallback
  Eigen::BDCSVD<Mat> svd(A);
  return svd.singularValues()(0);
}

Mat commutator(const Mat& A, const Mat& B) { return A * B - B * A; }

bool is_hermitian(const Mat& A, double tol) {
  return (A - A.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

Mat spectral_projection(const Mat& H, double a, double b, double eig_tol) {
  if (!is_hermitian(H, 1e-10))
    throw std::invalid_argument("spectral_projection: H not Hermitian");
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  const auto& ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (std::abs(ev(i) - a) < eig_tol || std::abs(ev(i) - b) < eig_tol)
      throw std::runtime_error(
          "spectral_projection: ambiguous cut (eigenvalue at interval "
          "endpoint; widen the interval)");
  Mat P = Mat::Zero(H.rows(), H.cols());
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) > a && ev(i) < b)
      P += es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint();
  return P;
}

Mat evolution_eig(const Mat& H, double t) {
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  Vec phases(H.rows());
  for (Eigen::Index i = 0; i < H.rows(); ++i)
    phases(i) = std::exp(cd(0.0, -es.eigenvalues()(i) * t));
  return es.eigenvectors() * phases.asDiagonal() *
         es.eigenvectors().adjoint();
}

// ============================================================================
// ProductState and conditional expectations
// ============================================================================

Mat ProductState::at(int site, int dim) const {
  auto it = factors.find(site);
  if (it == factors.end())
    return Mat::Identity(dim, dim) / static_cast<double>(dim);
  if (it->second.rows() != dim)
    throw std::invalid_argument("ProductState: factor dimension mismatch");
  return it->second;
}

void ProductState::validate() const {
  for (const auto& [site, m] : factors) {
    if (!is_hermitian(m, 1e-12))
      throw std::invalid_argument("ProductState: factor not Hermitian");
    if (std::abs(m.trace().real() - 1.0) > 1e-12 ||
        std::abs(m.trace().imag()) > 1e-12)
      throw std::invalid_argument("ProductState: factor trace != 1");
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    if (es.eigenvalues().minCoeff() < -1e-12)
      throw std::invalid_argument("ProductState: factor not PSD");
  }
}

ProductState ProductState::pure_basis(const SiteSet& sites, int k, int dim) {
  ProductState rho;
  Mat m = Mat::Zero(dim, dim);
  m(k, k) = 1.0;
  for (int x : sites) rho.factors[x] = m;
  return rho;
}

LocalOperator conditional_expectation_core(const LocalOperator& A,
                                           const SiteSet& X,
                                           const ProductState& rho,
                                           const HilbertStructure& H) {
  const SiteSet keep = set_intersection(X, A.support);
  const SiteSet comp = set_difference(A.support, keep);
  if (comp.empty()) return {keep, A.matrix};
  const auto soff = part_offsets(keep, A.support, H);
  const auto coff = part_offsets(comp, A.support, H);
  const long long dX = H.dim(keep), dC = H.dim(comp);
  // density matrix on the traced sites
  Mat W = Mat::Identity(1, 1);
  for (int x : comp) W = kron(W, rho.at(x, H.site_dim(x))).eval();
  Mat B = Mat::Zero(dX, dX);
  for (long long i = 0; i < dX; ++i)
    for (long long j = 0; j < dX; ++j) {
      cd acc(0.0, 0.0);
      for (long long ic = 0; ic < dC; ++ic)
        for (long long jc = 0; jc < dC; ++jc)
          acc += A.matrix(soff[i] + coff[ic], soff[j] + coff[jc]) * W(jc, ic);
      B(i, j) = acc;
    }
  return {keep, std::move(B)};
}

LocalOperator conditional_expectation(const LocalOperator& A, const SiteSet& X,
                                      const ProductState& rho,
                                      const HilbertStructure& H) {
  return embed(conditional_expectation_core(A, X, rho, H), A.support, H);
}

LocalOperator local_decomposition(const LocalOperator& A, const MetricSpace& G,
                                  const SiteSet& X, int n,
                                  const ProductState& rho,
                                  const HilbertStructure& H) {
  if (n < 0) throw std::invalid_argument("local_decomposition: n < 0");
  const SiteSet Xn = set_intersection(inflate(G, X, n), A.support);
  if (n == 0) return conditional_expectation(A, Xn, rho, H);
  const SiteSet Xm = set_intersection(inflate(G, X, n - 1), A.support);
  LocalOperator big = conditional_expectation(A, Xn, rho, H);
  LocalOperator small = conditional_expectation(A, Xm, rho, H);
  return {A.support, big.matrix - small.matrix};
}

// ============================================================================
// Deterministic randomness
// ============================================================================

unsigned long long SplitMix64::next() {
  unsigned long long z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double SplitMix64::uniform() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double SplitMix64::gaussian() {
  double u1 = uniform(), u2 = uniform();
  while (u1 <= 1e-300) u1 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

unsigned long long split_seed(unsigned long long seed,
                              unsigned long long purpose) {
  SplitMix64 s(seed ^ (0xA5A5A5A5A5A5A5A5ULL + purpose * 0x9e3779b97f4a7c15ULL));
  return s.next();
}

Mat random_matrix(int dim, unsigned long long seed) {
  SplitMix64 s(seed);
  Mat m(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = cd(s.gaussian(), s.gaussian());
  return m;
}

Mat random_hermitian(int dim, unsigned long long seed) {
  Mat m = random_matrix(dim, seed);
  return 0.5 * (m + m.adjoint()).eval();
}

Mat pauli(int k) {
  Mat m(2, 2);
  switch (k) {
    case 0: m << 1, 0, 0, 1; break;
    case 1: m << 0, 1, 1, 0; break;
    case 2: m << 0, cd(0, -1), cd(0, 1), 0; break;
    case 3: m << 1, 0, 0, -1; break;
    default: throw std::invalid_argument("pauli: k in {0,1,2,3}");
  }
  return m;
}

}  // namespace qlv
