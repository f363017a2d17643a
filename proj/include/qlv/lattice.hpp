#pragma once

// ============================================================================
// lattice: finite metric spaces standing in for the lattice Gamma.
//
// All spaces are finite; distances are stored in a dense symmetric table
// computed once at construction so that downstream bound evaluations are
// O(1) per lookup.  Site sets are sorted vectors of site ids.
// ============================================================================

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace qlv {

// A finite set of sites, kept sorted and duplicate-free.
using SiteSet = std::vector<int>;

SiteSet make_site_set(std::vector<int> sites);
bool set_contains(const SiteSet& s, int x);
bool is_subset(const SiteSet& a, const SiteSet& b);
SiteSet set_union(const SiteSet& a, const SiteSet& b);
SiteSet set_intersection(const SiteSet& a, const SiteSet& b);
SiteSet set_difference(const SiteSet& a, const SiteSet& b);

// ============================================================================
// MetricSpace
// ============================================================================

class MetricSpace {
 public:
  MetricSpace(Eigen::MatrixXd distance_table,
              std::vector<std::vector<int>> coords = {},
              std::string name = "custom");

  int size() const { return static_cast<int>(table_.rows()); }
  SiteSet all_sites() const;

  double dist(int x, int y) const { return table_(x, y); }
  // min over pairs; +infinity if either set is empty.
  double dist_sets(const SiteSet& X, const SiteSet& Y) const;
  double diameter(const SiteSet& X) const;
  double diameter() const { return table_.maxCoeff(); }

  const std::vector<int>& coord(int x) const { return coords_.at(x); }
  bool has_coords() const { return !coords_.empty(); }
  const std::string& name() const { return name_; }

 private:
  Eigen::MatrixXd table_;
  std::vector<std::vector<int>> coords_;
  std::string name_;
};

// Integer box in Z^nu with the l1 metric; site ordering is lexicographic in
// the coordinates.  Throws on a site-count above `site_cap`.
MetricSpace build_box(int nu, const std::vector<int>& lengths,
                      long long site_cap = 200000);

// Closed ball {y : d(x,y) <= n}.
SiteSet ball(const MetricSpace& G, int x, double n);

// Inflation X(n) = union of balls of radius n around the sites of X.
SiteSet inflate(const MetricSpace& G, const SiteSet& X, double n);

// ============================================================================
// nu-regularity: sup_x |b_x(n)| <= kappa * n^nu for integer n >= 1.
// ============================================================================

struct RegularityReport {
  double kappa = 0.0;          // smallest constant that works on this space
  double nu = 0.0;
  double max_violation = 0.0;  // max over (x,n) of |b_x(n)| - kappa*n^nu
  int argmax_site = -1;
  int argmax_radius = 0;
};

RegularityReport regularity_audit(const MetricSpace& G, double nu);

}  // namespace qlv
