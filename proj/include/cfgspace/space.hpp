#pragma once

// Base spaces and the metrics induced on point tuples and n-point sets.
//
// Two geometries are supported:
//   RealSpace   - R^k with the Euclidean metric; tuples use the l1 sum.
//   PadicSpace  - Q_p^k with the max-of-coordinates ultrametric; tuples use
//                 the max, and every distance is an exact power of p.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfgspace/assignment.hpp"
#include "cfgspace/local_field.hpp"

namespace cfgspace {

enum class ProductMode { sum, max };

inline std::string to_string(ProductMode m) { return m == ProductMode::sum ? "sum" : "max"; }

/// Closed axis-aligned box.
struct Box {
  std::vector<double> lo, hi;

  std::size_t dimension() const { return lo.size(); }
  bool contains(const std::vector<double>& x) const {
    if (x.size() != lo.size()) throw std::invalid_argument("box/point dimension mismatch");
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
  }
  bool contains(const Box& b) const {
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (b.lo[i] < lo[i] || b.hi[i] > hi[i]) return false;
    return true;
  }
  /// True when the interiors do not meet (shared faces are Lebesgue-null).
  bool disjoint(const Box& b) const {
    for (std::size_t i = 0; i < lo.size(); ++i)
      if (b.hi[i] <= lo[i] || hi[i] <= b.lo[i]) return true;
    return false;
  }
  double volume() const {
    double v = 1.0;
    for (std::size_t i = 0; i < lo.size(); ++i) v *= hi[i] - lo[i];
    return v;
  }
};

inline Box cube(std::size_t dim, double lo, double hi) {
  return Box{std::vector<double>(dim, lo), std::vector<double>(dim, hi)};
}

struct RealSpace {
  using Point = std::vector<double>;
  using Cell = Box;
  using Distance = double;
  /// Value type of the [0,1]-valued tuple metric.
  using Ratio = double;
  static constexpr ProductMode natural_mode = ProductMode::sum;
  static constexpr const char* kind = "real_box";

  std::size_t dim = 1;
  /// Half-width increment between exhaustion levels.
  double step = 1.0;

  Distance distance(const Point& a, const Point& b) const {
    check(a);
    check(b);
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  }
  Distance zero_distance() const { return 0.0; }
  static double to_double(Distance d) { return d; }
  bool contains(const Cell& c, const Point& x) const { return c.contains(x); }
  void check(const Point& x) const {
    if (x.size() != dim) throw std::invalid_argument("point dimension mismatch");
  }
};

struct PadicSpace {
  using Point = std::vector<PAdicNumber>;
  using Cell = PadicBall;
  using Distance = PowerOfP;
  using Ratio = PowerOfP;
  static constexpr ProductMode natural_mode = ProductMode::max;
  static constexpr const char* kind = "padic_product";

  int prime = 2;
  std::size_t dim = 1;
  int precision = kDefaultPrecision;

  Distance distance(const Point& a, const Point& b) const {
    check(a);
    check(b);
    PowerOfP d = PowerOfP::zero(prime);
    for (std::size_t i = 0; i < dim; ++i) d = max(d, PowerOfP::of(a[i] - b[i]));
    return d;
  }
  Distance zero_distance() const { return PowerOfP::zero(prime); }
  static double to_double(Distance d) { return d.value(); }
  bool contains(const Cell& c, const Point& x) const { return c.contains(x); }
  void check(const Point& x) const {
    if (x.size() != dim) throw std::invalid_argument("point dimension mismatch");
    for (const auto& c : x)
      if (c.prime() != prime) throw std::invalid_argument("point over a different prime");
  }
  PAdicNumber number(long long num, long long den = 1) const {
    return PAdicNumber::from_rational(num, den, prime, precision);
  }
  /// Ball of radius p^{-radius_exp} around the origin.
  Cell ball_at_origin(int radius_exp) const {
    return PadicBall{Point(dim, PAdicNumber::zero(prime, precision)), radius_exp};
  }
};

template <class Space>
using Tuple = std::vector<typename Space::Point>;

namespace detail {

template <class Space>
void check_mode(ProductMode mode) {
  if (mode != Space::natural_mode)
    throw std::invalid_argument(std::string("product mode '") + to_string(mode) +
                                "' does not match the " + Space::kind + " geometry");
}

template <class Space>
typename Space::Distance combine(typename Space::Distance acc, typename Space::Distance d) {
  if constexpr (Space::natural_mode == ProductMode::sum) return acc + d;
  else return max(acc, d);
}

}  // namespace detail

/// d^n on n-tuples: sum of per-point distances (real) or their max (p-adic).
template <class Space>
typename Space::Distance product_metric(const Space& space, const Tuple<Space>& x,
                                        const Tuple<Space>& y,
                                        ProductMode mode = Space::natural_mode) {
  detail::check_mode<Space>(mode);
  if (x.size() != y.size()) throw std::invalid_argument("tuples of different length");
  if (x.empty()) throw std::invalid_argument("empty tuples");
  auto acc = space.zero_distance();
  for (std::size_t i = 0; i < x.size(); ++i) acc = detail::combine<Space>(acc, space.distance(x[i], y[i]));
  return acc;
}

/// Distance from x to the diagonal of K^n (tuples with a repeated entry).
/// Merging the closest pair costs exactly d(x_i, x_j) in both geometries, and
/// merging more than one pair never costs less. Empty for n < 2, where the
/// diagonal is empty and the distance is infinite.
template <class Space>
std::optional<typename Space::Distance> diagonal_distance(const Space& space, const Tuple<Space>& x) {
  if (x.size() < 2) return std::nullopt;
  auto best = space.distance(x[0], x[1]);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const auto d = space.distance(x[i], x[j]);
      if (d < best) best = d;
    }
  return best;
}

/// The bounded metric on tuples of distinct points:
///   real:   d / (d + diag(x) + diag(y))
///   p-adic: d / max(d, diag(x), diag(y))
template <class Space>
typename Space::Ratio delta_metric(const Space& space, const Tuple<Space>& x, const Tuple<Space>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("tuples of different length");
  if (x.size() < 2) throw std::invalid_argument("delta metric needs tuples of length >= 2");
  const auto dx = *diagonal_distance(space, x);
  const auto dy = *diagonal_distance(space, y);
  const auto zero = space.zero_distance();
  if (!(zero < dx) || !(zero < dy)) throw std::invalid_argument("tuple has repeated points");
  const auto d = product_metric(space, x, y);
  if constexpr (Space::natural_mode == ProductMode::sum) {
    // dx + dy commutes exactly, so the result is symmetric
    return d == 0.0 ? 0.0 : d / (d + (dx + dy));
  } else {
    return d / max(d, max(dx, dy));
  }
}

/// Pairwise cost matrix cost[i][j] = d(a_i, b_j).
template <class Space>
Matrix<typename Space::Distance> cost_matrix(const Space& space, const Tuple<Space>& a,
                                             const Tuple<Space>& b) {
  Matrix<typename Space::Distance> c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    c[i].reserve(b.size());
    for (std::size_t j = 0; j < b.size(); ++j) c[i].push_back(space.distance(a[i], b[j]));
  }
  return c;
}

/// min over permutations s of d^n(a, b o s), via an assignment solver.
template <class Space>
typename Space::Distance matching_metric_points(const Space& space, const Tuple<Space>& a,
                                                const Tuple<Space>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("configurations of different cardinality");
  if (a.empty()) return space.zero_distance();
  const auto cost = cost_matrix(space, a, b);
  std::vector<std::size_t> assign;
  if constexpr (Space::natural_mode == ProductMode::sum) assign = min_cost_assignment(cost);
  else assign = bottleneck_assignment(cost);
  auto acc = space.zero_distance();
  for (std::size_t i = 0; i < a.size(); ++i) acc = detail::combine<Space>(acc, cost[i][assign[i]]);
  return acc;
}

template <class Space>
struct Exhaustion {
  std::vector<typename Space::Cell> levels;
  bool clopen = false;

  std::size_t size() const { return levels.size(); }
  const typename Space::Cell& operator[](std::size_t i) const { return levels[i]; }
  /// Index of the first level containing x, or size() if none does.
  std::size_t level_of(const Space& space, const typename Space::Point& x) const {
    for (std::size_t i = 0; i < levels.size(); ++i)
      if (space.contains(levels[i], x)) return i;
    return levels.size();
  }
};

/// Nested closed boxes [-i*step, i*step]^k for i = 1..count.
inline Exhaustion<RealSpace> make_exhaustion(const RealSpace& space, std::size_t count) {
  if (count < 1) throw std::invalid_argument("exhaustion needs at least one level");
  Exhaustion<RealSpace> e;
  for (std::size_t i = 1; i <= count; ++i) {
    const double h = space.step * static_cast<double>(i);
    e.levels.push_back(cube(space.dim, -h, h));
  }
  return e;
}

/// Nested clopen balls around 0 of radius 1, p, ..., p^{count-1}.
inline Exhaustion<PadicSpace> make_exhaustion(const PadicSpace& space, std::size_t count) {
  if (count < 1) throw std::invalid_argument("exhaustion needs at least one level");
  Exhaustion<PadicSpace> e;
  e.clopen = true;
  for (std::size_t i = 0; i < count; ++i) e.levels.push_back(space.ball_at_origin(-static_cast<int>(i)));
  return e;
}

}  // namespace cfgspace
