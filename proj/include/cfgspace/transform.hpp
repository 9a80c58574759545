#pragma once

// Invertible maps of the base space standing in for group elements.
//
// Real kinds act coordinatewise (piecewise-affine bijections, exact time-T
// flows of tent-shaped vector fields) or translate. p-adic kinds permute
// disjoint equal-radius balls by center translation, or translate inside a
// ball; both preserve Haar measure exactly.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cfgspace/config.hpp"

namespace cfgspace {

class domain_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Continuous increasing piecewise-affine bijection of R, identity outside
/// [knots.front(), knots.back()].
class PiecewiseAffine1D {
 public:
  PiecewiseAffine1D() = default;
  PiecewiseAffine1D(std::vector<double> knots, std::vector<double> images)
      : knots_(std::move(knots)), images_(std::move(images)) {
    if (knots_.size() != images_.size() || knots_.size() < 2)
      throw std::invalid_argument("piecewise-affine map needs >= 2 matching knots and images");
    for (std::size_t i = 1; i < knots_.size(); ++i)
      if (!(knots_[i] > knots_[i - 1]) || !(images_[i] > images_[i - 1]))
        throw std::invalid_argument("piecewise-affine knots and images must be strictly increasing");
    if (knots_.front() != images_.front() || knots_.back() != images_.back())
      throw std::invalid_argument("piecewise-affine map must fix the end knots");
  }

  bool is_identity() const { return knots_.empty() || knots_ == images_; }
  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& images() const { return images_; }
  double lo() const { return knots_.front(); }
  double hi() const { return knots_.back(); }

  double apply(double x) const { return eval(knots_, images_, x); }
  double apply_inverse(double y) const { return eval(images_, knots_, y); }
  /// Derivative of the inverse map at y.
  double inverse_slope(double y) const {
    if (knots_.empty() || y < lo() || y >= hi()) return 1.0;
    const auto i = segment(images_, y);
    return (knots_[i + 1] - knots_[i]) / (images_[i + 1] - images_[i]);
  }
  PiecewiseAffine1D inverse() const {
    PiecewiseAffine1D r;
    r.knots_ = images_;
    r.images_ = knots_;
    return r;
  }
  /// Breakpoints of the map and of its inverse, for quadrature.
  std::vector<double> breakpoints() const {
    std::vector<double> b = knots_;
    b.insert(b.end(), images_.begin(), images_.end());
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    return b;
  }

 private:
  static std::size_t segment(const std::vector<double>& xs, double x) {
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(it - xs.begin() - 1, 0,
                                                                static_cast<std::ptrdiff_t>(xs.size()) - 2));
  }
  static double eval(const std::vector<double>& from, const std::vector<double>& to, double x) {
    if (from.empty() || x <= from.front() || x >= from.back()) return x;
    const auto i = segment(from, x);
    const double t = (x - from[i]) / (from[i + 1] - from[i]);
    return to[i] + t * (to[i + 1] - to[i]);
  }

  std::vector<double> knots_, images_;
};

/// Time-T flow of the tent field v(x) = h(x-a)/(c-a) on [a,c],
/// h(b-x)/(b-c) on [c,b], zero elsewhere. Closed form on each linear piece.
class TentFlow1D {
 public:
  TentFlow1D() = default;
  TentFlow1D(double a, double c, double b, double peak_speed, double time)
      : a_(a), c_(c), b_(b), h_(peak_speed), t_(time) {
    if (!(a < c && c < b)) throw std::invalid_argument("tent flow needs a < c < b");
    if (!(peak_speed > 0)) throw std::invalid_argument("tent flow peak speed must be positive");
  }

  double a() const { return a_; }
  double c() const { return c_; }
  double b() const { return b_; }
  double peak_speed() const { return h_; }
  double time() const { return t_; }
  bool is_identity() const { return t_ == 0.0 || h_ == 0.0; }

  double velocity(double x) const {
    if (x <= a_ || x >= b_) return 0.0;
    return x <= c_ ? h_ * (x - a_) / (c_ - a_) : h_ * (b_ - x) / (b_ - c_);
  }
  double apply(double x) const { return flow(x, t_); }
  double apply_inverse(double x) const { return flow(x, -t_); }
  /// Derivative of the inverse flow at x: v(phi_{-T} x) / v(x).
  double inverse_slope(double x) const {
    if (x <= a_ || x >= b_ || h_ == 0.0) return 1.0;
    return velocity(apply_inverse(x)) / velocity(x);
  }
  TentFlow1D inverse() const {
    TentFlow1D r = *this;
    r.t_ = -t_;
    return r;
  }

 private:
  double flow(double x, double t) const {
    if (x <= a_ || x >= b_ || t == 0.0) return x;
    const double k1 = h_ / (c_ - a_), k2 = h_ / (b_ - c_);
    if (t > 0) {
      if (x < c_) {
        const double tau = std::log((c_ - a_) / (x - a_)) / k1;
        if (t <= tau) return a_ + (x - a_) * std::exp(k1 * t);
        x = c_;
        t -= tau;
      }
      return b_ - (b_ - x) * std::exp(-k2 * t);
    }
    double s = -t;
    if (x > c_) {
      const double tau = std::log((b_ - c_) / (b_ - x)) / k2;
      if (s <= tau) return b_ - (b_ - x) * std::exp(k2 * s);
      x = c_;
      s -= tau;
    }
    return a_ + (x - a_) * std::exp(-k1 * s);
  }

  double a_ = 0, c_ = 0.5, b_ = 1, h_ = 0, t_ = 0;
};

enum class TransformKind {
  identity,
  real_piecewise_affine,
  real_flow_step,
  real_translation,
  padic_ball_permutation,
  padic_translation,
  composite,
};

inline std::string to_string(TransformKind k) {
  switch (k) {
    case TransformKind::identity: return "identity";
    case TransformKind::real_piecewise_affine: return "real_piecewise_affine";
    case TransformKind::real_flow_step: return "real_flow_step";
    case TransformKind::real_translation: return "real_translation";
    case TransformKind::padic_ball_permutation: return "padic_ball_permutation";
    case TransformKind::padic_translation: return "padic_translation";
    case TransformKind::composite: return "composite";
  }
  return "unknown";
}

namespace detail {

struct RealCoordMaps {
  // one entry per coordinate; empty maps are the identity
  std::vector<PiecewiseAffine1D> affine;
  std::vector<TentFlow1D> flows;
};

struct PadicPermutation {
  std::vector<PadicBall> balls;
  Permutation perm;
};

struct PadicShift {
  PadicBall window;
  std::vector<PAdicNumber> shift;
};

}  // namespace detail

/// Invertible map of the base space with inverse, inverse Jacobian and support.
template <class Space>
class Transformation {
 public:
  using Point = typename Space::Point;

  Transformation() : node_(std::make_shared<Node>()) {}

  static Transformation identity() { return Transformation(); }

  TransformKind kind() const { return node_->kind; }
  const Transformation& child(std::size_t i) const { return node_->children.at(i); }
  std::size_t child_count() const { return node_->children.size(); }

  Point apply(const Point& x) const { return eval(x, false); }
  Point apply_inverse(const Point& x) const { return eval(x, true); }

  Transformation inverse() const {
    auto n = std::make_shared<Node>(*node_);
    n->inverted = !n->inverted;
    if (n->kind == TransformKind::composite) {
      // (f g)^{-1} = g^{-1} f^{-1}
      n->inverted = false;
      n->children = {node_->children[1].inverse(), node_->children[0].inverse()};
    }
    return Transformation(std::move(n));
  }

  /// |det D(psi^{-1})(x)|, the Lebesgue/Haar volume factor of the inverse.
  double inverse_jacobian(const Point& x) const {
    const Node& n = *node_;
    switch (n.kind) {
      case TransformKind::identity:
      case TransformKind::real_translation:
      case TransformKind::padic_ball_permutation:
      case TransformKind::padic_translation:
        return 1.0;
      case TransformKind::real_piecewise_affine:
      case TransformKind::real_flow_step:
        if constexpr (std::is_same_v<Space, RealSpace>) {
          double j = 1.0;
          for (std::size_t i = 0; i < x.size(); ++i) {
            if (n.kind == TransformKind::real_piecewise_affine) {
              const auto& m = n.coords.affine.at(i);
              if (m.is_identity()) continue;
              // the inverse of the inverse has slope 1/slope at the preimage
              j *= n.inverted ? 1.0 / m.inverse_slope(m.apply(x[i])) : m.inverse_slope(x[i]);
            } else {
              const auto& f = n.coords.flows.at(i);
              if (f.is_identity()) continue;
              j *= n.inverted ? f.inverse().inverse_slope(x[i]) : f.inverse_slope(x[i]);
            }
          }
          return j;
        }
        return 1.0;
      case TransformKind::composite: {
        const auto& outer = n.children[0];
        const auto& inner = n.children[1];
        return outer.inverse_jacobian(x) * inner.inverse_jacobian(outer.apply_inverse(x));
      }
    }
    return 1.0;
  }

  /// Cells outside of which the map is the identity (boxes may be unbounded).
  Region<Space> support() const {
    const Node& n = *node_;
    Region<Space> r;
    if constexpr (std::is_same_v<Space, RealSpace>) {
      constexpr double inf = std::numeric_limits<double>::infinity();
      if (n.kind == TransformKind::real_translation) {
        bool moves = std::any_of(n.real_shift.begin(), n.real_shift.end(), [](double v) { return v != 0.0; });
        if (moves) r.cells.push_back(cube(n.real_shift.size(), -inf, inf));
      } else if (n.kind == TransformKind::real_piecewise_affine || n.kind == TransformKind::real_flow_step) {
        const std::size_t k = n.kind == TransformKind::real_piecewise_affine ? n.coords.affine.size()
                                                                              : n.coords.flows.size();
        for (std::size_t i = 0; i < k; ++i) {
          double lo, hi;
          if (n.kind == TransformKind::real_piecewise_affine) {
            if (n.coords.affine[i].is_identity()) continue;
            lo = n.coords.affine[i].lo();
            hi = n.coords.affine[i].hi();
          } else {
            if (n.coords.flows[i].is_identity()) continue;
            lo = n.coords.flows[i].a();
            hi = n.coords.flows[i].b();
          }
          Box b = cube(k, -inf, inf);
          b.lo[i] = lo;
          b.hi[i] = hi;
          r.cells.push_back(b);
        }
      }
    } else {
      if (n.kind == TransformKind::padic_ball_permutation) {
        for (std::size_t i = 0; i < n.padic_perm.balls.size(); ++i)
          if (n.padic_perm.perm(i) != i) r.cells.push_back(n.padic_perm.balls[i]);
      } else if (n.kind == TransformKind::padic_translation) {
        r.cells.push_back(n.padic_shift.window);
      }
    }
    if (n.kind == TransformKind::composite)
      for (const auto& c : n.children) {
        const auto s = c.support();
        r.cells.insert(r.cells.end(), s.cells.begin(), s.cells.end());
      }
    return r;
  }

  /// True when the map sends the cell onto itself, so the Poisson law of a
  /// window is carried to itself.
  bool preserves(const typename Space::Cell& window) const {
    const Node& n = *node_;
    switch (n.kind) {
      case TransformKind::identity: return true;
      case TransformKind::composite:
        return n.children[0].preserves(window) && n.children[1].preserves(window);
      case TransformKind::real_translation:
        return std::all_of(n.real_shift.begin(), n.real_shift.end(), [](double v) { return v == 0.0; });
      case TransformKind::real_piecewise_affine:
      case TransformKind::real_flow_step:
        if constexpr (std::is_same_v<Space, RealSpace>) {
          for (const auto& cell : support().cells)
            for (std::size_t i = 0; i < cell.dimension(); ++i)
              if (std::isfinite(cell.lo[i]) && (cell.lo[i] < window.lo[i] || cell.hi[i] > window.hi[i]))
                return false;
        }
        return true;
      case TransformKind::padic_ball_permutation:
        if constexpr (std::is_same_v<Space, PadicSpace>) {
          const auto& pp = n.padic_perm;
          for (std::size_t i = 0; i < pp.balls.size(); ++i) {
            const auto& from = pp.balls[i];
            const auto& to = pp.balls[pp.perm(i)];
            if (pp.perm(i) == i) continue;
            const bool from_in = window.contains(from), to_in = window.contains(to);
            if (from_in != to_in) return false;
            if (!from_in && (!window.disjoint(from) || !window.disjoint(to))) return false;
          }
        }
        return true;
      case TransformKind::padic_translation:
        if constexpr (std::is_same_v<Space, PadicSpace>) {
          const auto& w = n.padic_shift.window;
          if (window.contains(w) || window.disjoint(w)) return true;
          // the window sits strictly inside the translated ball
          PowerOfP shift = PowerOfP::zero(w.prime());
          for (const auto& c : n.padic_shift.shift) shift = max(shift, PowerOfP::of(c));
          return !(window.radius() < shift);
        }
        return true;
    }
    return false;
  }

  // --- builders -----------------------------------------------------------

  static Transformation piecewise_affine(std::vector<PiecewiseAffine1D> per_coordinate) {
    static_assert(std::is_same_v<Space, RealSpace>);
    auto n = std::make_shared<Node>();
    n->kind = TransformKind::real_piecewise_affine;
    n->coords.affine = std::move(per_coordinate);
    return Transformation(std::move(n));
  }
  static Transformation flow_step(std::vector<TentFlow1D> per_coordinate) {
    static_assert(std::is_same_v<Space, RealSpace>);
    auto n = std::make_shared<Node>();
    n->kind = TransformKind::real_flow_step;
    n->coords.flows = std::move(per_coordinate);
    return Transformation(std::move(n));
  }
  static Transformation translation(std::vector<double> shift) {
    static_assert(std::is_same_v<Space, RealSpace>);
    auto n = std::make_shared<Node>();
    n->kind = TransformKind::real_translation;
    n->real_shift = std::move(shift);
    return Transformation(std::move(n));
  }
  static Transformation ball_permutation(std::vector<PadicBall> balls, Permutation perm) {
    static_assert(std::is_same_v<Space, PadicSpace>);
    if (balls.size() != perm.size()) throw std::invalid_argument("ball count does not match permutation size");
    for (std::size_t i = 0; i < balls.size(); ++i) {
      if (balls[i].radius_exp != balls.front().radius_exp)
        throw std::invalid_argument("ball permutation needs balls of equal radius");
      if (balls[i].dimension() != balls.front().dimension())
        throw std::invalid_argument("ball permutation needs balls of equal dimension");
      for (std::size_t j = 0; j < i; ++j)
        if (!balls[i].disjoint(balls[j])) throw std::invalid_argument("ball permutation needs disjoint balls");
    }
    auto n = std::make_shared<Node>();
    n->kind = TransformKind::padic_ball_permutation;
    n->padic_perm = {std::move(balls), std::move(perm)};
    return Transformation(std::move(n));
  }
  /// x -> x + shift on the window ball, identity elsewhere; the shift must not
  /// exceed the window radius so the window maps onto itself.
  static Transformation padic_translation(PadicBall window, std::vector<PAdicNumber> shift) {
    static_assert(std::is_same_v<Space, PadicSpace>);
    if (shift.size() != window.dimension()) throw std::invalid_argument("shift dimension mismatch");
    for (const auto& c : shift)
      if (window.radius() < PowerOfP::of(c)) throw std::invalid_argument("shift leaves the translation window");
    auto n = std::make_shared<Node>();
    n->kind = TransformKind::padic_translation;
    n->padic_shift = {std::move(window), std::move(shift)};
    return Transformation(std::move(n));
  }
  /// compose(f, g) = f o g.
  static Transformation compose(Transformation outer, Transformation inner) {
    auto n = std::make_shared<Node>();
    n->kind = TransformKind::composite;
    n->children = {std::move(outer), std::move(inner)};
    return Transformation(std::move(n));
  }

  // --- read access for serialization --------------------------------------
  bool inverted() const { return node_->inverted; }
  const std::vector<PiecewiseAffine1D>& affine_maps() const { return node_->coords.affine; }
  const std::vector<TentFlow1D>& flows() const { return node_->coords.flows; }
  const std::vector<double>& real_shift() const { return node_->real_shift; }
  const std::vector<PadicBall>& balls() const { return node_->padic_perm.balls; }
  const Permutation& ball_perm() const { return node_->padic_perm.perm; }
  const PadicBall& shift_window() const { return node_->padic_shift.window; }
  const std::vector<PAdicNumber>& padic_shift() const { return node_->padic_shift.shift; }

 private:
  struct Node {
    TransformKind kind = TransformKind::identity;
    bool inverted = false;
    detail::RealCoordMaps coords;
    std::vector<double> real_shift;
    detail::PadicPermutation padic_perm;
    detail::PadicShift padic_shift;
    std::vector<Transformation> children;
  };

  explicit Transformation(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  Point eval(const Point& x, bool inverse_direction) const {
    const Node& n = *node_;
    const bool inv = inverse_direction != n.inverted;
    switch (n.kind) {
      case TransformKind::identity: return x;
      case TransformKind::composite:
        return inverse_direction ? n.children[1].apply_inverse(n.children[0].apply_inverse(x))
                                 : n.children[0].apply(n.children[1].apply(x));
      default: break;
    }
    if constexpr (std::is_same_v<Space, RealSpace>) {
      Point y = x;
      if (n.kind == TransformKind::real_translation) {
        if (x.size() != n.real_shift.size()) throw domain_error("point outside the translation's space");
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = inv ? y[i] - n.real_shift[i] : y[i] + n.real_shift[i];
      } else if (n.kind == TransformKind::real_piecewise_affine) {
        if (x.size() != n.coords.affine.size()) throw domain_error("point dimension does not match map");
        for (std::size_t i = 0; i < y.size(); ++i)
          y[i] = inv ? n.coords.affine[i].apply_inverse(y[i]) : n.coords.affine[i].apply(y[i]);
      } else if (n.kind == TransformKind::real_flow_step) {
        if (x.size() != n.coords.flows.size()) throw domain_error("point dimension does not match map");
        for (std::size_t i = 0; i < y.size(); ++i)
          y[i] = inv ? n.coords.flows[i].apply_inverse(y[i]) : n.coords.flows[i].apply(y[i]);
      }
      return y;
    } else {
      if (n.kind == TransformKind::padic_ball_permutation) {
        const auto& pp = n.padic_perm;
        for (std::size_t i = 0; i < pp.balls.size(); ++i) {
          if (!pp.balls[i].contains(x)) continue;
          const std::size_t j = inv ? pp.perm.inverse()(i) : pp.perm(i);
          Point y = x;
          for (std::size_t c = 0; c < y.size(); ++c)
            y[c] = (x[c] - pp.balls[i].center[c]) + pp.balls[j].center[c];
          return y;
        }
        return x;
      }
      if (n.kind == TransformKind::padic_translation) {
        const auto& ps = n.padic_shift;
        if (!ps.window.contains(x)) return x;
        Point y = x;
        for (std::size_t c = 0; c < y.size(); ++c) y[c] = inv ? x[c] - ps.shift[c] : x[c] + ps.shift[c];
        return y;
      }
      return x;
    }
  }

  std::shared_ptr<const Node> node_;
};

template <class Space>
Transformation<Space> compose(const Transformation<Space>& outer, const Transformation<Space>& inner) {
  return Transformation<Space>::compose(outer, inner);
}

inline Transformation<PadicSpace> build_ball_permutation(std::vector<PadicBall> balls, Permutation perm) {
  return Transformation<PadicSpace>::ball_permutation(std::move(balls), std::move(perm));
}

/// 1-D piecewise-affine map lifted to R^1.
inline Transformation<RealSpace> build_piecewise_affine(std::vector<double> knots, std::vector<double> images) {
  return Transformation<RealSpace>::piecewise_affine({PiecewiseAffine1D(std::move(knots), std::move(images))});
}

/// Image of a configuration under psi^{-1}.
template <class Space>
FiniteConfig<Space> pull_back(const Transformation<Space>& psi, const FiniteConfig<Space>& g) {
  std::vector<typename Space::Point> pts;
  pts.reserve(g.size());
  for (const auto& x : g) pts.push_back(psi.apply_inverse(x));
  return FiniteConfig<Space>(g.space(), std::move(pts));
}

/// Image of a configuration under psi.
template <class Space>
FiniteConfig<Space> push_forward(const Transformation<Space>& psi, const FiniteConfig<Space>& g) {
  std::vector<typename Space::Point> pts;
  pts.reserve(g.size());
  for (const auto& x : g) pts.push_back(psi.apply(x));
  return FiniteConfig<Space>(g.space(), std::move(pts));
}

/// sigma(psi, gamma) for the canonical cross-section.
template <class Space>
Permutation cocycle(const Transformation<Space>& psi, const FiniteConfig<Space>& g) {
  return cocycle_with(g, [&](const auto& x) { return psi.apply_inverse(x); });
}

}  // namespace cfgspace
