#pragma once

// ============================================================================
// algebra: dense complex operator algebra on tensor-product Hilbert spaces.
//
// Site ordering inside tensor products is the global ascending order of the
// site ids (the lexicographic order of the underlying box); the first site in
// a support is the most significant tensor factor.
// ============================================================================

#include "qlv/lattice.hpp"

#include <Eigen/Dense>

#include <complex>
#include <map>

namespace qlv {

using cd = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

// ============================================================================
// HilbertStructure: local dimensions over a volume, with a total-dim cap.
// ============================================================================

class HilbertStructure {
 public:
  explicit HilbertStructure(SiteSet volume, int default_dim = 2,
                            std::map<int, int> dims = {},
                            long long dim_cap = 4096);

  const SiteSet& volume() const { return volume_; }
  int site_dim(int x) const;
  long long dim(const SiteSet& X) const;
  long long total_dim() const { return dim(volume_); }

 private:
  SiteSet volume_;
  int default_dim_;
  std::map<int, int> dims_;
};

// ============================================================================
// LocalOperator: a matrix tagged with its support.
// ============================================================================

struct LocalOperator {
  SiteSet support;
  Mat matrix;
};

Mat kron(const Mat& A, const Mat& B);

// A tensor 1 on volume \ support(A), with global site ordering.
LocalOperator embed(const LocalOperator& A, const SiteSet& volume,
                    const HilbertStructure& H);

// Largest singular value (power iteration with SVD fallback; deterministic).
double opnorm(const Mat& A);
inline double opnorm(const LocalOperator& A) { return opnorm(A.matrix); }

Mat commutator(const Mat& A, const Mat& B);
bool is_hermitian(const Mat& A, double tol = 1e-10);

// Orthogonal projector onto eigenvectors of Hermitian H with eigenvalue in
// [a,b]; throws if an eigenvalue sits within eig_tol of an endpoint.
Mat spectral_projection(const Mat& H, double a, double b,
                        double eig_tol = 1e-8);

// exp(-i H t) for Hermitian H, through the eigenbasis.
Mat evolution_eig(const Mat& H, double t);

// ============================================================================
// ProductState: per-site density matrices; default is the normalized trace.
// ============================================================================

struct ProductState {
  std::map<int, Mat> factors;  // site -> density matrix

  // Density matrix used at `site` (stored factor or 1/d).
  Mat at(int site, int dim) const;
  void validate() const;  // PSD within 1e-12, trace 1 within 1e-12

  static ProductState tracial() { return {}; }
  // |k><k| at every listed site.
  static ProductState pure_basis(const SiteSet& sites, int k, int dim = 2);
};

// Pi_X(A): contract every site of volume(A) \ X against its density matrix.
// Returns the core on X (support X-intersect-volume).
LocalOperator conditional_expectation_core(const LocalOperator& A,
                                           const SiteSet& X,
                                           const ProductState& rho,
                                           const HilbertStructure& H);

// Same, embedded back on A's volume: Pi_X^Lambda(A) = core tensor 1.
LocalOperator conditional_expectation(const LocalOperator& A, const SiteSet& X,
                                      const ProductState& rho,
                                      const HilbertStructure& H);

// Delta_{X(n)}(A): Pi_X for n = 0, else Pi_{X(n) cap Lambda} - Pi_{X(n-1) cap
// Lambda}; map norm <= 2.
LocalOperator local_decomposition(const LocalOperator& A, const MetricSpace& G,
                                  const SiteSet& X, int n,
                                  const ProductState& rho,
                                  const HilbertStructure& H);

// ============================================================================
// Deterministic randomness (counter-based, platform-independent).
// ============================================================================

struct SplitMix64 {
  unsigned long long state;
  explicit SplitMix64(unsigned long long seed) : state(seed) {}
  unsigned long long next();
  double uniform();   // [0,1)
  double gaussian();  // Box-Muller
};

// Derive an independent stream from (seed, purpose counter).
unsigned long long split_seed(unsigned long long seed,
                              unsigned long long purpose);

Mat random_matrix(int dim, unsigned long long seed);
Mat random_hermitian(int dim, unsigned long long seed);

// Pauli matrices and the one-site operator basis {1, X, Y, Z}.
Mat pauli(int k);  // 0 -> 1, 1 -> sigma^x, 2 -> sigma^y, 3 -> sigma^z

}  // namespace qlv
