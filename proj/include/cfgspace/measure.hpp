#pragma once

// Base measures on real boxes and p-adic ball products, their samplers, and
// the quasi-invariance factor rho_m(psi, x) = m^psi(dx) / m(dx).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "cfgspace/numerics.hpp"
#include "cfgspace/transform.hpp"

namespace cfgspace {

// ---------------------------------------------------------------------------
// p-adic Gaussian analog, one coordinate: density F exp(-|x|^2 s) w.r.t. Haar.

/// Haar mass of the sphere |x| = p^k.
inline double shell_mass(int p, int k) {
  return std::pow(static_cast<double>(p), k) * (1.0 - 1.0 / static_cast<double>(p));
}

struct NormalizerResult {
  double normalizer = 0.0;  // F
  double tail_bound = 0.0;  // bound on the neglected mass relative to 1/F
};

/// F = 1 / sum over shells |x| = p^k, k in [-cutoff, cutoff], of
/// exp(-p^{2k} s) * shell mass, plus the Haar mass of the innermost ball.
inline NormalizerResult padic_gaussian_normalizer(double s, int p, int cutoff, double tail_tolerance = 1e-12) {
  if (!(s > 0)) throw std::invalid_argument("p-adic Gaussian scale must be positive");
  if (!is_prime(p)) throw std::invalid_argument("not a prime");
  if (cutoff < 1) throw std::invalid_argument("shell cutoff must be positive");
  const double pd = static_cast<double>(p);
  double total = std::pow(pd, -cutoff - 1);  // |x| <= p^{-cutoff-1}, density ~ F there
  for (int k = cutoff; k >= -cutoff; --k) total += std::exp(-std::pow(pd, 2.0 * k) * s) * shell_mass(p, k);
  double upper = 0.0;
  for (int k = cutoff + 1; k < cutoff + 64; ++k) {
    const double t = std::exp(-std::pow(pd, 2.0 * k) * s) * shell_mass(p, k);
    upper += t;
    if (t == 0.0) break;
  }
  const double inner = std::pow(pd, -cutoff - 1) * (1.0 - std::exp(-std::pow(pd, -2.0 * cutoff - 2) * s));
  NormalizerResult r{1.0 / total, (upper + inner) / total};
  if (r.tail_bound > tail_tolerance)
    throw std::invalid_argument("shell cutoff too small for the requested tail tolerance");
  return r;
}

/// One coordinate of the p-adic Gaussian analog.
struct PadicGaussianCoord {
  int prime = 2;
  double scale = 1.0;  // s
  double normalizer = 1.0;  // F
  int cutoff = 40;

  static PadicGaussianCoord make(int p, double s, int cutoff = 40) {
    return {p, s, padic_gaussian_normalizer(s, p, cutoff).normalizer, cutoff};
  }

  double density_at_abs(double t) const { return normalizer * std::exp(-t * t * scale); }
  double density(const PAdicNumber& x) const { return density_at_abs(x.abs()); }

  /// Mass of B(0, p^{-r}) by shell summation.
  double centered_ball_mass(int r) const {
    const double pd = static_cast<double>(prime);
    double m = 0.0;
    const int lowest = -cutoff;
    for (int k = -r; k >= lowest; --k) m += density_at_abs(std::pow(pd, k)) * shell_mass(prime, k);
    m += normalizer * std::pow(pd, std::min(-r, lowest) - 1);
    return m;
  }
  double ball_mass(const PAdicNumber& center, int r) const {
    if (!center.is_zero() && center.val() < r)  // 0 outside the ball, |x| = |center| on it
      return density(center) * std::pow(static_cast<double>(prime), -r);
    return centered_ball_mass(r);
  }
};

// ---------------------------------------------------------------------------
// Measure kinds

struct Lebesgue {
  double intensity = 1.0;
};

/// Product of centered Gaussians, coordinate density exp(-x^2/lambda)/sqrt(pi lambda).
struct GaussianProduct {
  std::vector<double> eigenvalues;
};

struct Haar {
  double intensity = 1.0;
};

struct PadicGaussianAnalog {
  std::vector<PadicGaussianCoord> coords;
};

template <class Space>
class MeasureModel;

namespace detail {

template <class Space>
struct MeasureNode;

template <>
struct MeasureNode<RealSpace> {
  std::variant<Lebesgue, GaussianProduct> kind;
  std::vector<MeasureModel<RealSpace>> sum;  // non-empty => weighted sum of children
  std::vector<double> weights;
};

template <>
struct MeasureNode<PadicSpace> {
  std::variant<Haar, PadicGaussianAnalog> kind;
  std::vector<MeasureModel<PadicSpace>> sum;
  std::vector<double> weights;
};

inline double gaussian_sigma(double lambda) { return std::sqrt(0.5 * lambda); }

inline double normal_cdf(double x, double sigma) {
  if (x == std::numeric_limits<double>::infinity()) return 1.0;
  if (x == -std::numeric_limits<double>::infinity()) return 0.0;
  return 0.5 * std::erfc(-x / (sigma * std::sqrt(2.0)));
}

/// Uniform sample from the ball B(center, p^{-r}) at the given relative precision.
inline PAdicNumber uniform_in_ball(const PAdicNumber& center, int r, int precision, Rng& rng) {
  const int p = center.prime();
  std::uniform_int_distribution<int> digit(0, p - 1);
  std::vector<int> d(static_cast<std::size_t>(precision));
  for (auto& x : d) x = digit(rng);
  return center.truncated_below(r) + PAdicNumber::from_digits(p, r, std::move(d), precision);
}

/// Uniform sample from the sphere |x| = p^k.
inline PAdicNumber uniform_on_shell(int p, int k, int precision, Rng& rng) {
  std::uniform_int_distribution<int> lead(1, p - 1), digit(0, p - 1);
  std::vector<int> d(static_cast<std::size_t>(precision));
  d[0] = lead(rng);
  for (std::size_t i = 1; i < d.size(); ++i) d[i] = digit(rng);
  return PAdicNumber::from_digits(p, -k, std::move(d), precision);
}

inline PAdicNumber sample_gaussian_coord(const PadicGaussianCoord& g, const PAdicNumber& center, int r,
                                         int precision, Rng& rng) {
  if (!center.is_zero() && center.val() < r) return uniform_in_ball(center, r, precision, rng);
  const double pd = static_cast<double>(g.prime);
  std::vector<double> w;
  std::vector<int> shells;
  const int lowest = std::min(-r, -g.cutoff);
  for (int k = -r; k >= lowest; --k) {
    w.push_back(g.density_at_abs(std::pow(pd, k)) * shell_mass(g.prime, k));
    shells.push_back(k);
  }
  w.push_back(g.normalizer * std::pow(pd, lowest - 1));
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  const std::size_t i = pick(rng);
  if (i == shells.size())
    return uniform_in_ball(PAdicNumber::zero(g.prime, precision), -(lowest - 1), precision, rng);
  return uniform_on_shell(g.prime, shells[i], precision, rng);
}

}  // namespace detail

/// A nonatomic base measure: density w.r.t. Lebesgue/Haar, exact masses of
/// cells, and a sampler for the normalized restriction to a cell.
template <class Space>
class MeasureModel {
 public:
  using Point = typename Space::Point;
  using Cell = typename Space::Cell;
  using Node = detail::MeasureNode<Space>;

  MeasureModel() = default;

  static MeasureModel lebesgue(std::size_t dim, double intensity = 1.0) {
    static_assert(std::is_same_v<Space, RealSpace>);
    if (!(intensity >= 0)) throw std::invalid_argument("intensity must be nonnegative");
    return MeasureModel(RealSpace{dim, 1.0}, Node{Lebesgue{intensity}, {}, {}});
  }
  static MeasureModel gaussian(std::vector<double> eigenvalues) {
    static_assert(std::is_same_v<Space, RealSpace>);
    for (double l : eigenvalues)
      if (!(l > 0)) throw std::invalid_argument("Gaussian eigenvalues must be positive");
    const std::size_t dim = eigenvalues.size();
    return MeasureModel(RealSpace{dim, 1.0}, Node{GaussianProduct{std::move(eigenvalues)}, {}, {}});
  }
  static MeasureModel haar(const PadicSpace& space, double intensity = 1.0) {
    static_assert(std::is_same_v<Space, PadicSpace>);
    if (!(intensity >= 0)) throw std::invalid_argument("intensity must be nonnegative");
    return MeasureModel(space, Node{Haar{intensity}, {}, {}});
  }
  static MeasureModel padic_gaussian(const PadicSpace& space, const std::vector<double>& scales, int cutoff = 40) {
    static_assert(std::is_same_v<Space, PadicSpace>);
    if (scales.size() != space.dim) throw std::invalid_argument("one scale per coordinate required");
    PadicGaussianAnalog g;
    for (double s : scales) g.coords.push_back(PadicGaussianCoord::make(space.prime, s, cutoff));
    return MeasureModel(space, Node{std::move(g), {}, {}});
  }
  /// sum_i weights[i] * parts[i]; unit weights when none are given.
  static MeasureModel sum(std::vector<MeasureModel> parts, std::vector<double> weights = {}) {
    if (parts.empty()) throw std::invalid_argument("empty measure sum");
    if (weights.empty()) weights.assign(parts.size(), 1.0);
    if (weights.size() != parts.size()) throw std::invalid_argument("one weight per summand required");
    for (double w : weights)
      if (!(w >= 0) || !std::isfinite(w)) throw std::invalid_argument("weights must be finite and nonnegative");
    for (const auto& q : parts)
      if (q.space().dim != parts.front().space().dim) throw std::invalid_argument("summands on different spaces");
    Node n;
    n.sum = parts;
    n.weights = std::move(weights);
    return MeasureModel(parts.front().space(), std::move(n));
  }

  const Space& space() const { return space_; }
  const Node& node() const { return *node_; }
  bool is_sum() const { return !node_->sum.empty(); }

  std::string name() const {
    if (is_sum()) return "sum";
    if constexpr (std::is_same_v<Space, RealSpace>)
      return std::holds_alternative<Lebesgue>(node_->kind) ? "lebesgue" : "gaussian";
    else
      return std::holds_alternative<Haar>(node_->kind) ? "haar" : "padic_gaussian";
  }

  double total_mass() const {
    if (is_sum()) {
      double m = 0;
      for (std::size_t i = 0; i < node_->sum.size(); ++i)
        if (node_->weights[i] > 0) m += node_->weights[i] * node_->sum[i].total_mass();
      return m;
    }
    if constexpr (std::is_same_v<Space, RealSpace>) {
      if (const auto* l = std::get_if<Lebesgue>(&node_->kind))
        return l->intensity == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
      return 1.0;
    } else {
      if (const auto* h = std::get_if<Haar>(&node_->kind))
        return h->intensity == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
      return 1.0;
    }
  }

  double density(const Point& x) const {
    space_.check(x);
    if (is_sum()) {
      double d = 0;
      for (std::size_t i = 0; i < node_->sum.size(); ++i) d += node_->weights[i] * node_->sum[i].density(x);
      return d;
    }
    if constexpr (std::is_same_v<Space, RealSpace>) {
      if (const auto* l = std::get_if<Lebesgue>(&node_->kind)) return l->intensity;
      const auto& g = std::get<GaussianProduct>(node_->kind);
      double d = 1.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double lam = g.eigenvalues[i];
        d *= std::exp(-x[i] * x[i] / lam) / std::sqrt(M_PI * lam);
      }
      return d;
    } else {
      if (const auto* h = std::get_if<Haar>(&node_->kind)) return h->intensity;
      const auto& g = std::get<PadicGaussianAnalog>(node_->kind);
      double d = 1.0;
      for (std::size_t i = 0; i < x.size(); ++i) d *= g.coords[i].density(x[i]);
      return d;
    }
  }

  double mass(const Cell& c) const {
    if (is_sum()) {
      double m = 0;
      for (std::size_t i = 0; i < node_->sum.size(); ++i)
        if (node_->weights[i] > 0) m += node_->weights[i] * node_->sum[i].mass(c);
      return m;
    }
    if constexpr (std::is_same_v<Space, RealSpace>) {
      if (c.dimension() != space_.dim) throw std::invalid_argument("cell dimension mismatch");
      if (const auto* l = std::get_if<Lebesgue>(&node_->kind)) {
        if (l->intensity == 0.0) return 0.0;
        return l->intensity * c.volume();
      }
      const auto& g = std::get<GaussianProduct>(node_->kind);
      double m = 1.0;
      for (std::size_t i = 0; i < c.dimension(); ++i) {
        const double s = detail::gaussian_sigma(g.eigenvalues[i]);
        m *= detail::normal_cdf(c.hi[i], s) - detail::normal_cdf(c.lo[i], s);
      }
      return m;
    } else {
      if (c.dimension() != space_.dim) throw std::invalid_argument("cell dimension mismatch");
      if (const auto* h = std::get_if<Haar>(&node_->kind)) return h->intensity * haar_volume(c);
      const auto& g = std::get<PadicGaussianAnalog>(node_->kind);
      double m = 1.0;
      for (std::size_t i = 0; i < c.dimension(); ++i) m *= g.coords[i].ball_mass(c.center[i], c.radius_exp);
      return m;
    }
  }

  double mass(const Region<Space>& r) const {
    double m = 0;
    for (const auto& c : r.cells) m += mass(c);
    return m;
  }

  /// Draws from m restricted to c, normalized. The cell must have positive mass.
  Point sample(const Cell& c, Rng& rng) const {
    if (is_sum()) {
      std::vector<double> w;
      for (std::size_t i = 0; i < node_->sum.size(); ++i)
        w.push_back(node_->weights[i] > 0 ? node_->weights[i] * node_->sum[i].mass(c) : 0.0);
      std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
      return node_->sum[pick(rng)].sample(c, rng);
    }
    if constexpr (std::is_same_v<Space, RealSpace>) {
      Point x(c.dimension());
      if (std::holds_alternative<Lebesgue>(node_->kind)) {
        for (std::size_t i = 0; i < x.size(); ++i) {
          if (!std::isfinite(c.lo[i]) || !std::isfinite(c.hi[i]))
            throw std::invalid_argument("Lebesgue sampling needs a bounded window");
          std::uniform_real_distribution<double> u(c.lo[i], c.hi[i]);
          x[i] = u(rng);
        }
        return x;
      }
      const auto& g = std::get<GaussianProduct>(node_->kind);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double s = detail::gaussian_sigma(g.eigenvalues[i]);
        const double a = detail::normal_cdf(c.lo[i], s), b = detail::normal_cdf(c.hi[i], s);
        double q = a + (b - a) * u(rng);
        q = std::clamp(q, 1e-300, 1.0 - 1e-16);
        x[i] = boost::math::quantile(boost::math::normal_distribution<double>(0.0, s), q);
        x[i] = std::clamp(x[i], c.lo[i], c.hi[i]);
      }
      return x;
    } else {
      Point x(c.dimension());
      if (std::holds_alternative<Haar>(node_->kind)) {
        for (std::size_t i = 0; i < x.size(); ++i)
          x[i] = detail::uniform_in_ball(c.center[i], c.radius_exp, space_.precision, rng);
        return x;
      }
      const auto& g = std::get<PadicGaussianAnalog>(node_->kind);
      for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = detail::sample_gaussian_coord(g.coords[i], c.center[i], c.radius_exp, space_.precision, rng);
      return x;
    }
  }

  /// p-adic only: the density is constant on the ball.
  bool constant_on(const Cell& c) const {
    if constexpr (std::is_same_v<Space, PadicSpace>) {
      if (is_sum())
        return std::all_of(node_->sum.begin(), node_->sum.end(), [&](const auto& m) { return m.constant_on(c); });
      if (std::holds_alternative<Haar>(node_->kind)) return true;
      for (const auto& x : c.center)
        if (x.is_zero() || x.val() >= c.radius_exp) return false;
      return true;
    } else {
      (void)c;
      return false;
    }
  }

 private:
  MeasureModel(Space space, Node node) : space_(std::move(space)), node_(std::make_shared<const Node>(std::move(node))) {}

  Space space_{};
  std::shared_ptr<const Node> node_;
};

/// rho_m(psi, x) = m(psi^{-1} dx) / m(dx)
///              = density(psi^{-1} x) |det D psi^{-1}(x)| / density(x).
template <class Space>
double rho_factor(const MeasureModel<Space>& m, const Transformation<Space>& psi, const typename Space::Point& x) {
  const double dx = m.density(x);
  if (!(dx > 0)) throw domain_error("quasi-invariance factor undefined where the density vanishes");
  const auto y = psi.apply_inverse(x);
  return m.density(y) * psi.inverse_jacobian(x) / dx;
}

struct ShiftFactor {
  double value = 1.0;
  bool saturated = false;
};

/// exp(sum_l [2 z_l x_l - z_l^2] / lambda_l): the density of the Gaussian
/// shifted by z relative to the unshifted one, at x.
inline ShiftFactor gaussian_shift_factor(const std::vector<double>& z, const std::vector<double>& x,
                                         const std::vector<double>& eigenvalues) {
  if (z.size() > eigenvalues.size() || z.size() > x.size())
    throw std::invalid_argument("shift has more coordinates than the point or spectrum");
  double e = 0.0;
  for (std::size_t l = 0; l < z.size(); ++l) {
    if (!(eigenvalues[l] > 0)) throw std::invalid_argument("eigenvalues must be positive");
    e += (2.0 * z[l] * x[l] - z[l] * z[l]) / eigenvalues[l];
  }
  constexpr double cap = 700.0;
  if (e > cap) return {std::numeric_limits<double>::max(), true};
  if (e < -cap) return {0.0, true};
  return {std::exp(e), false};
}

struct DiagnosticEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  double window_mass = 0.0;
  /// fraction of sampled window points whose image leaves the window
  double moved_off_fraction = 0.0;
};

/// Monte-Carlo estimate of int_W |rho^{1/2}(psi, x) - 1|^2 m(dx).
template <class Space>
DiagnosticEstimate quasi_invariance_diagnostic(const MeasureModel<Space>& m, const Transformation<Space>& psi,
                                               const typename Space::Cell& window, std::size_t samples, Rng& rng) {
  if (samples == 0) throw std::invalid_argument("diagnostic needs at least one sample");
  DiagnosticEstimate r;
  r.window_mass = m.mass(window);
  RunningStats st;
  std::size_t moved = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    const auto x = m.sample(window, rng);
    const double d = std::sqrt(rho_factor(m, psi, x)) - 1.0;
    st.add(d * d);
    if (!m.space().contains(window, psi.apply(x))) ++moved;
  }
  r.estimate = r.window_mass * st.mean();
  r.stderr_ = r.window_mass * st.stderr_mean();
  r.moved_off_fraction = static_cast<double>(moved) / static_cast<double>(samples);
  return r;
}

}  // namespace cfgspace
