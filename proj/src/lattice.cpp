#include "qlv/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qlv {

SiteSet make_site_set(std::vector<int> sites) {
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  return sites;
}

bool set_contains(const SiteSet& s, int x) {
  return std::binary_search(s.begin(), s.end(), x);
}

bool is_subset(const SiteSet& a, const SiteSet& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

SiteSet set_union(const SiteSet& a, const SiteSet& b) {
  SiteSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(),
                 std::back_inserter(out));
  return out;
}

SiteSet set_intersection(const SiteSet& a, const SiteSet& b) {
  SiteSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(out));
  return out;
}

SiteSet set_difference(const SiteSet& a, const SiteSet& b) {
  SiteSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(),
                      std::back_inserter(out));
  return out;
}

// ============================================================================
// MetricSpace
// ============================================================================

MetricSpace::MetricSpace(Eigen::MatrixXd distance_table,
                         std::vector<std::vector<int>> coords,
                         std::string name)
    : table_(std::move(distance_table)),
      coords_(std::move(coords)),
      name_(std::move(name)) {
  if (table_.rows() != table_.cols() || table_.rows() == 0)
    throw std::invalid_argument("MetricSpace: table must be square, nonempty");
  const int n = size();
  for (int x = 0; x < n; ++x) {
    if (table_(x, x) != 0.0)
      throw std::invalid_argument("MetricSpace: d(x,x) != 0");
    for (int y = x + 1; y < n; ++y) {
      if (table_(x, y) != table_(y, x))
        throw std::invalid_argument("MetricSpace: asymmetric table");
      if (table_(x, y) <= 0.0)
        throw std::invalid_argument("MetricSpace: d(x,y) <= 0 for x != y");
    }
  }
}

SiteSet MetricSpace::all_sites() const {
  SiteSet s(size());
  for (int i = 0; i < size(); ++i) s[i] = i;
  return s;
}

double MetricSpace::dist_sets(const SiteSet& X, const SiteSet& Y) const {
  double best = std::numeric_limits<double>::infinity();
  for (int x : X)
    for (int y : Y) best = std::min(best, dist(x, y));
  return best;
}

double MetricSpace::diameter(const SiteSet& X) const {
  double best = 0.0;
  for (size_t i = 0; i < X.size(); ++i)
    for (size_t j = i + 1; j < X.size(); ++j)
      best = std::max(best, dist(X[i], X[j]));
  return best;
}

MetricSpace build_box(int nu, const std::vector<int>& lengths,
                      long long site_cap) {
  if (nu <= 0 || static_cast<int>(lengths.size()) != nu)
    throw std::invalid_argument("build_box: lengths.size() must equal nu");
  long long total = 1;
  for (int L : lengths) {
    if (L <= 0) throw std::invalid_argument("build_box: lengths must be > 0");
    total *= L;
    if (total > site_cap)
      throw std::length_error("build_box: site cap exceeded");
  }

  // Lexicographic enumeration of coordinates.
  std::vector<std::vector<int>> coords;
  coords.reserve(static_cast<size_t>(total));
  std::vector<int> c(nu, 0);
  for (long long i = 0; i < total; ++i) {
    coords.push_back(c);
    for (int k = nu - 1; k >= 0; --k) {
      if (++c[k] < lengths[k]) break;
      c[k] = 0;
    }
  }

  Eigen::MatrixXd table(total, total);
  for (long long x = 0; x < total; ++x)
    for (long long y = 0; y < total; ++y) {
      int d = 0;
      for (int k = 0; k < nu; ++k) d += std::abs(coords[x][k] - coords[y][k]);
      table(x, y) = d;
    }
  return MetricSpace(std::move(table), std::move(coords), "box");
}

SiteSet ball(const MetricSpace& G, int x, double n) {
  if (x < 0 || x >= G.size()) throw std::out_of_range("ball: unknown site");
  if (n < 0) throw std::invalid_argument("ball: negative radius");
  SiteSet out;
  for (int y = 0; y < G.size(); ++y)
    if (G.dist(x, y) <= n) out.push_back(y);
  return out;
}

SiteSet inflate(const MetricSpace& G, const SiteSet& X, double n) {
  for (int x : X)
    if (x < 0 || x >= G.size())
      throw std::out_of_range("inflate: site outside space");
  SiteSet out;
  for (int y = 0; y < G.size(); ++y) {
    for (int x : X) {
      if (G.dist(x, y) <= n) {
        out.push_back(y);
        break;
      }
    }
  }
  return out;
}

RegularityReport regularity_audit(const MetricSpace& G, double nu) {
  if (nu < 0) throw std::invalid_argument("regularity_audit: nu < 0");
  RegularityReport rep;
  rep.nu = nu;
  const int nmax = std::max(1, static_cast<int>(std::ceil(G.diameter())));
  for (int x = 0; x < G.size(); ++x) {
    for (int n = 1; n <= nmax; ++n) {
      const double b = static_cast<double>(ball(G, x, n).size());
      const double ratio = b / std::pow(static_cast<double>(n), nu);
      if (ratio > rep.kappa) {
        rep.kappa = ratio;
        rep.argmax_site = x;
        rep.argmax_radius = n;
      }
    }
  }
  rep.max_violation = 0.0;  // kappa is the exact enumerated supremum
  return rep;
}

}  // namespace qlv
