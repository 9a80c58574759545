#pragma once

// Finite configurations (n-point subsets of a base space), counting maps,
// canonical cross-sections and the permutation cocycle they induce.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cfgspace/space.hpp"

namespace cfgspace {

class collision_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Real points closer than this are treated as the same point.
inline constexpr double kCollisionTolerance = 1e-12;

inline std::strong_ordering canonical_compare_points(const std::vector<PAdicNumber>& a,
                                                     const std::vector<PAdicNumber>& b) {
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
    if (auto c = canonical_compare(a[i], b[i]); c != 0) return c;
  return a.size() <=> b.size();
}

inline std::strong_ordering canonical_compare_points(const std::vector<double>& a,
                                                     const std::vector<double>& b) {
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    if (a[i] < b[i]) return std::strong_ordering::less;
    if (b[i] < a[i]) return std::strong_ordering::greater;
  }
  return a.size() <=> b.size();
}

template <class Space>
bool same_point(const Space& space, const typename Space::Point& a, const typename Space::Point& b) {
  if constexpr (std::is_same_v<Space, RealSpace>) return space.distance(a, b) < kCollisionTolerance;
  else return a == b;
}

/// A finite union of cells (boxes or balls).
template <class Space>
struct Region {
  std::vector<typename Space::Cell> cells;

  Region() = default;
  Region(std::initializer_list<typename Space::Cell> c) : cells(c) {}
  explicit Region(std::vector<typename Space::Cell> c) : cells(std::move(c)) {}

  bool contains(const Space& space, const typename Space::Point& x) const {
    return std::any_of(cells.begin(), cells.end(), [&](const auto& c) { return space.contains(c, x); });
  }
};

/// An n-point subset of the base space. Points are kept sorted in the
/// canonical order, which is also the cross-section used for cocycles.
template <class Space>
class FiniteConfig {
 public:
  using Point = typename Space::Point;

  FiniteConfig() = default;
  FiniteConfig(Space space, std::vector<Point> points) : space_(std::move(space)), points_(std::move(points)) {
    for (const auto& p : points_) space_.check(p);
    std::sort(points_.begin(), points_.end(),
              [](const Point& a, const Point& b) { return canonical_compare_points(a, b) < 0; });
    for (std::size_t i = 1; i < points_.size(); ++i)
      if (same_point(space_, points_[i - 1], points_[i]))
        throw collision_error("configuration has coinciding points");
  }
  static FiniteConfig empty(Space space) { return FiniteConfig(std::move(space), {}); }

  const Space& space() const { return space_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const std::vector<Point>& points() const { return points_; }
  const Point& operator[](std::size_t i) const { return points_[i]; }
  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }

  friend bool operator==(const FiniteConfig& a, const FiniteConfig& b) { return a.points_ == b.points_; }

 private:
  Space space_{};
  std::vector<Point> points_;
};

/// N_A(gamma) = card(gamma intersect A).
template <class Space>
std::size_t count(const FiniteConfig<Space>& g, const Region<Space>& a) {
  return static_cast<std::size_t>(std::count_if(g.begin(), g.end(),
                                                [&](const auto& x) { return a.contains(g.space(), x); }));
}

template <class Space>
std::size_t count(const FiniteConfig<Space>& g, const typename Space::Cell& cell) {
  return count(g, Region<Space>{cell});
}

template <class Space>
FiniteConfig<Space> restrict(const FiniteConfig<Space>& g, const Region<Space>& a) {
  std::vector<typename Space::Point> kept;
  for (const auto& x : g)
    if (a.contains(g.space(), x)) kept.push_back(x);
  return FiniteConfig<Space>(g.space(), std::move(kept));
}

template <class Space>
FiniteConfig<Space> restrict(const FiniteConfig<Space>& g, const typename Space::Cell& cell) {
  return restrict(g, Region<Space>{cell});
}

/// Union of two disjoint configurations; a shared point raises collision_error.
template <class Space>
FiniteConfig<Space> config_union(const FiniteConfig<Space>& a, const FiniteConfig<Space>& b) {
  std::vector<typename Space::Point> pts = a.points();
  pts.insert(pts.end(), b.begin(), b.end());
  return FiniteConfig<Space>(a.space(), std::move(pts));
}

/// A permutation of {0..n-1}; acts on tuples on the right:
/// (x_0..x_{n-1}) sigma = (x_{sigma(0)}, ..., x_{sigma(n-1)}).
class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<std::size_t> image) : image_(std::move(image)) {
    std::vector<char> seen(image_.size());
    for (auto i : image_) {
      if (i >= image_.size() || seen[i]) throw std::invalid_argument("not a permutation");
      seen[i] = 1;
    }
  }
  static Permutation identity(std::size_t n) {
    std::vector<std::size_t> im(n);
    std::iota(im.begin(), im.end(), std::size_t{0});
    return Permutation(std::move(im));
  }

  std::size_t size() const { return image_.size(); }
  std::size_t operator()(std::size_t i) const { return image_.at(i); }
  const std::vector<std::size_t>& image() const { return image_; }
  bool is_identity() const {
    for (std::size_t i = 0; i < image_.size(); ++i)
      if (image_[i] != i) return false;
    return true;
  }

  /// Function composition: (a * b)(i) = a(b(i)).
  friend Permutation operator*(const Permutation& a, const Permutation& b) {
    if (a.size() != b.size()) throw std::invalid_argument("permutations of different size");
    std::vector<std::size_t> im(a.size());
    for (std::size_t i = 0; i < im.size(); ++i) im[i] = a.image_[b.image_[i]];
    return Permutation(std::move(im));
  }
  Permutation inverse() const {
    std::vector<std::size_t> im(image_.size());
    for (std::size_t i = 0; i < im.size(); ++i) im[image_[i]] = i;
    return Permutation(std::move(im));
  }
  int sign() const {
    std::vector<char> seen(image_.size());
    int s = 1;
    for (std::size_t i = 0; i < image_.size(); ++i) {
      if (seen[i]) continue;
      std::size_t len = 0;
      for (std::size_t j = i; !seen[j]; j = image_[j]) {
        seen[j] = 1;
        ++len;
      }
      if (len % 2 == 0) s = -s;
    }
    return s;
  }
  template <class T>
  std::vector<T> apply_right(const std::vector<T>& x) const {
    std::vector<T> out;
    out.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out.push_back(x[image_[i]]);
    return out;
  }

  friend bool operator==(const Permutation&, const Permutation&) = default;

 private:
  std::vector<std::size_t> image_;
};

/// Ordered tuple s(gamma) whose underlying set is gamma.
template <class Space>
Tuple<Space> cross_section(const FiniteConfig<Space>& g) {
  return g.points();
}

/// Ordering that lists points of inner exhaustion shells first, canonical
/// order inside a shell.
template <class Space>
Tuple<Space> cross_section(const FiniteConfig<Space>& g, const Exhaustion<Space>& shells) {
  Tuple<Space> t = g.points();
  std::stable_sort(t.begin(), t.end(), [&](const auto& a, const auto& b) {
    return shells.level_of(g.space(), a) < shells.level_of(g.space(), b);
  });
  return t;
}

/// The permutation sigma(psi, gamma) with
///   s(psi^{-1} gamma) = (psi^{-1} s(gamma)) sigma.
/// `inverse_map` evaluates psi^{-1} at a point.
template <class Space, class InverseMap>
Permutation cocycle_with(const FiniteConfig<Space>& g, InverseMap&& inverse_map,
                         const Exhaustion<Space>* shells = nullptr) {
  const Tuple<Space> s = shells ? cross_section(g, *shells) : cross_section(g);
  Tuple<Space> moved;
  moved.reserve(s.size());
  for (const auto& x : s) moved.push_back(inverse_map(x));
  for (std::size_t i = 0; i < moved.size(); ++i)
    for (std::size_t j = i + 1; j < moved.size(); ++j)
      if (same_point(g.space(), moved[i], moved[j]))
        throw collision_error("inverse transformation is not injective on the configuration");
  const FiniteConfig<Space> image(g.space(), moved);
  const Tuple<Space> target = shells ? cross_section(image, *shells) : cross_section(image);
  std::vector<std::size_t> sigma(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    const auto it = std::find_if(moved.begin(), moved.end(),
                                 [&](const auto& y) { return same_point(g.space(), y, target[i]); });
    sigma[i] = static_cast<std::size_t>(it - moved.begin());
  }
  return Permutation(std::move(sigma));
}

/// The clopen set of configurations having a point in each of n disjoint small
/// balls around the points of gamma. Any accepted configuration with exactly
/// n points lies within matching distance < eps of gamma.
class CountingNeighborhood {
 public:
  CountingNeighborhood(PadicSpace space, std::vector<PadicBall> balls, int eta_exp)
      : space_(std::move(space)), balls_(std::move(balls)), eta_exp_(eta_exp) {}

  const std::vector<PadicBall>& balls() const { return balls_; }
  /// eta = p^{-eta_exp}
  int eta_exponent() const { return eta_exp_; }

  bool contains(const FiniteConfig<PadicSpace>& g) const {
    return std::all_of(balls_.begin(), balls_.end(), [&](const PadicBall& b) { return count(g, b) >= 1; });
  }

 private:
  PadicSpace space_;
  std::vector<PadicBall> balls_;
  int eta_exp_;
};

/// Picks the largest eta = p^{-e} < eps for which the open balls of radius
/// eta * p^{-n} around the n points are pairwise disjoint. An open ball
/// {d < p^{-j}} is the closed ball of radius p^{-(j+1)}.
inline CountingNeighborhood counting_neighborhood(const FiniteConfig<PadicSpace>& g, double eps) {
  if (g.empty()) throw std::invalid_argument("counting neighborhood of the empty configuration");
  if (!(eps > 0) || !std::isfinite(eps)) throw std::invalid_argument("eps must be positive and finite");
  const auto& sp = g.space();
  const int p = sp.prime;
  const int n = static_cast<int>(g.size());
  // smallest e with p^{-e} < eps
  int e = static_cast<int>(std::floor(-std::log(eps) / std::log(static_cast<double>(p))));
  while (std::pow(static_cast<double>(p), -static_cast<double>(e)) >= eps) ++e;
  while (std::pow(static_cast<double>(p), -static_cast<double>(e - 1)) < eps) --e;
  // disjointness: eta p^{-n} <= min pairwise distance
  if (g.size() >= 2) {
    const PowerOfP dmin = *diagonal_distance(sp, g.points());
    e = std::max(e, dmin.exponent() - n);
  }
  const int open_exp = e + n;       // open radius p^{-open_exp}
  const int closed_exp = open_exp + 1;
  int finest = std::numeric_limits<int>::max();
  for (const auto& x : g)
    for (const auto& c : x)
      if (!c.is_zero()) finest = std::min(finest, c.val() + c.precision());
      else finest = std::min(finest, sp.precision);
  if (closed_exp >= finest) throw precision_error("eps is below the representable granularity");
  std::vector<PadicBall> balls;
  for (const auto& x : g) balls.push_back(PadicBall{x, closed_exp});
  return CountingNeighborhood(sp, std::move(balls), e);
}

}  // namespace cfgspace
