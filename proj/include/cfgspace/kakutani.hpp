#pragma once

// One-dimensional laws, their Hellinger affinities, and the Kakutani
// equivalence/singularity decision for infinite product measures.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cfgspace/measure.hpp"

namespace cfgspace {

/// A probability law on the real line given by its Lebesgue density.
struct RealLaw1D {
  enum class Kind { gaussian, uniform };
  Kind kind = Kind::gaussian;
  double a = 0.0;  // gaussian: mean;               uniform: lower end
  double b = 1.0;  // gaussian: standard deviation; uniform: upper end

  static RealLaw1D gaussian(double mean, double sd) {
    if (!(sd > 0)) throw std::invalid_argument("standard deviation must be positive");
    return {Kind::gaussian, mean, sd};
  }
  /// C exp(-(x - mean)^2 s^2), i.e. standard deviation 1 / (s sqrt 2).
  static RealLaw1D gaussian_scale(double mean, double s) { return gaussian(mean, 1.0 / (s * std::sqrt(2.0))); }
  static RealLaw1D uniform(double lo, double hi) {
    if (!(hi > lo)) throw std::invalid_argument("uniform law needs lo < hi");
    return {Kind::uniform, lo, hi};
  }

  double density(double x) const {
    if (kind == Kind::uniform) return (x >= a && x <= b) ? 1.0 / (b - a) : 0.0;
    const double u = (x - a) / b;
    return std::exp(-0.5 * u * u) / (b * std::sqrt(2.0 * M_PI));
  }
  double sqrt_density(double x) const {
    if (kind == Kind::uniform) return (x >= a && x <= b) ? 1.0 / std::sqrt(b - a) : 0.0;
    const double u = (x - a) / b;
    return std::exp(-0.25 * u * u) / std::sqrt(b * std::sqrt(2.0 * M_PI));
  }
  /// Interval outside which the density is negligible (< e^-800 relative).
  std::pair<double, double> effective_support() const {
    if (kind == Kind::uniform) return {a, b};
    return {a - 40.0 * b, a + 40.0 * b};
  }
  std::vector<double> breakpoints() const {
    if (kind == Kind::uniform) return {a, b};
    return {a - 40.0 * b, a - 8.0 * b, a - 2.0 * b, a, a + 2.0 * b, a + 8.0 * b, a + 40.0 * b};
  }
};

/// Radial p-adic law F exp(-|x - center|^2 s p^{2e}) v(dx); e = scale_exp.
/// The substitution x = center + p^e u reduces it to F exp(-|u|^2 s) v(du),
/// which is how affinities are computed, so huge p^{2e} never appear.
struct PadicLaw1D {
  int prime = 2;
  double scale = 1.0;  // s
  int scale_exp = 0;   // e
  PAdicNumber center = PAdicNumber::zero(2);
  int cutoff = 40;

  static PadicLaw1D gaussian_analog(int p, double s, int scale_exp = 0,
                                    PAdicNumber center = PAdicNumber(), int cutoff = 40) {
    if (center.prime() != p) center = PAdicNumber::zero(p);
    return {p, s, scale_exp, std::move(center), cutoff};
  }
  double normalizer() const { return padic_gaussian_normalizer(scale, prime, cutoff).normalizer; }
};

using Law1D = std::variant<RealLaw1D, PadicLaw1D>;

struct HellingerResult {
  double affinity = 1.0;     // int sqrt(f g)
  double distance_sq = 0.0;  // 1 - affinity, computed as (1/2) int (sqrt f - sqrt g)^2
};

/// Affinity of two real laws by adaptive Simpson over the joint support.
inline HellingerResult hellinger_affinity(const RealLaw1D& mu, const RealLaw1D& nu) {
  std::vector<double> br = mu.breakpoints();
  const auto nb = nu.breakpoints();
  br.insert(br.end(), nb.begin(), nb.end());
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end()), br.end());
  const bool both_gaussian = mu.kind == RealLaw1D::Kind::gaussian && nu.kind == RealLaw1D::Kind::gaussian;
  const auto h = [&](double x) {
    double d;
    if (both_gaussian) {
      // sqrt f - sqrt g = sqrt f * (1 - exp(log(g/f)/2)), with the log ratio factored
      double log_ratio;
      if (mu.b == nu.b) {
        log_ratio = -(mu.a - nu.a) * (2.0 * x - mu.a - nu.a) / (2.0 * mu.b * mu.b);
      } else {
        const double u1 = (x - mu.a) / mu.b, u2 = (x - nu.a) / nu.b;
        log_ratio = 0.5 * (u1 - u2) * (u1 + u2) + std::log(mu.b / nu.b);
      }
      // factor out the larger density so the expm1 argument is never positive
      d = log_ratio <= 0 ? mu.sqrt_density(x) * -std::expm1(0.5 * log_ratio)
                         : nu.sqrt_density(x) * std::expm1(-0.5 * log_ratio);
    } else {
      d = mu.sqrt_density(x) - nu.sqrt_density(x);
    }
    return 0.5 * d * d;
  };
  // tolerance relative to the integrand's size, so tiny distances keep their digits
  double peak = 0.0;
  for (std::size_t i = 0; i + 1 < br.size(); ++i)
    for (int j = 0; j <= 64; ++j) peak = std::max(peak, h(br[i] + (br[i + 1] - br[i]) * j / 64.0));
  HellingerResult r;
  if (peak == 0.0) return r;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < br.size(); ++i) {
    const double piece = br[i + 1] - br[i];
    total += adaptive_simpson(h, br[i], br[i + 1], std::max(1e-300, 1e-9 * peak * piece), 30);
  }
  r.distance_sq = std::clamp(total, 0.0, 1.0);
  r.affinity = 1.0 - r.distance_sq;
  return r;
}

namespace detail {

/// sqrt(F) exp(-t^2 s / 2)
inline double padic_sqrt_density(double sqrtF, double s, double t) { return sqrtF * std::exp(-0.5 * t * t * s); }

/// (sqrt f1(t) - sqrt f2(u))^2 without cancellation when f1 = f2 and t ~ u.
inline double padic_sq_diff(double sqrtF1, double s1, double t, double sqrtF2, double s2, double u) {
  if (sqrtF1 == sqrtF2 && s1 == s2) {
    const double lo = std::min(t, u), hi = std::max(t, u);
    const double d = padic_sqrt_density(sqrtF1, s1, lo) * -std::expm1(-0.5 * (hi * hi - lo * lo) * s1);
    return d * d;
  }
  const double d = padic_sqrt_density(sqrtF1, s1, t) - padic_sqrt_density(sqrtF2, s2, u);
  return d * d;
}

}  // namespace detail

/// Affinity of two radial p-adic laws by exact shell summation. With r the
/// normalized distance between the centers, Q_p splits into |x| > r, |x| < r,
/// |x - z| < r and the rest of the sphere |x| = r; on each piece both
/// densities are functions of a single valuation.
inline HellingerResult hellinger_affinity(const PadicLaw1D& mu, const PadicLaw1D& nu) {
  if (mu.prime != nu.prime) throw std::invalid_argument("laws over different primes");
  if (mu.scale_exp != nu.scale_exp) throw std::invalid_argument("p-adic laws must share the scale exponent");
  const int p = mu.prime;
  const double pd = static_cast<double>(p);
  const double s1 = mu.scale, s2 = nu.scale;
  const double r1 = std::sqrt(mu.normalizer()), r2 = std::sqrt(nu.normalizer());
  const bool same_shape = r1 == r2 && s1 == s2;
  const double smin = std::min(s1, s2);
  const auto diff = [&](double t, double u) { return detail::padic_sq_diff(r1, s1, t, r2, s2, u); };
  // shells far enough out that both densities are below e^-800
  const auto beyond = [&](double t) { return t * t * smin > 1600.0; };
  constexpr int depth = 160;  // shells resolved below the shift scale; the rest is lumped

  // H^2 = (1/2) sum over pieces of Haar mass * (sqrt f - sqrt g)^2
  double acc = 0.0;
  const auto add = [&](double mass, double d2) { acc += 0.5 * mass * d2; };
  const PAdicNumber z = nu.center - mu.center;
  if (z.is_zero()) {
    if (!same_shape) {
      int top = 0;
      while (!beyond(std::pow(pd, top))) ++top;
      const int bottom = top - depth - 2 * mu.cutoff;
      add(std::pow(pd, bottom - 1), diff(0.0, 0.0));
      for (int k = bottom; k <= top; ++k) add(shell_mass(p, k), diff(std::pow(pd, k), std::pow(pd, k)));
    }
  } else {
    const long long rexp = static_cast<long long>(mu.scale_exp) - z.val();  // normalized |z| = p^rexp
    if (rexp > 4096) return {0.0, 1.0};
    if (rexp < -4096) {
      // shift far below every scale: only the shapes differ
      PadicLaw1D centered = nu;
      centered.center = mu.center;
      return hellinger_affinity(mu, centered);
    }
    const int R = static_cast<int>(rexp);
    const double r = std::pow(pd, R);
    // |x| < r: f1(|x|) vs f2(r); |x - z| < r: f1(r) vs f2(|x - z|)
    for (int k = R - 1; k >= R - depth; --k) {
      const double t = std::pow(pd, k);
      add(shell_mass(p, k), diff(t, r));
      add(shell_mass(p, k), diff(r, t));
    }
    const double core = std::pow(pd, R - depth - 1);
    add(core, diff(0.0, r));
    add(core, diff(r, 0.0));
    // rest of the sphere |x| = r, where |x - z| = r as well
    add(r * (pd - 2.0) / pd, diff(r, r));
    // |x| > r: both at distance |x|
    if (!same_shape)
      for (int k = R + 1; !beyond(std::pow(pd, k - 1)); ++k) add(shell_mass(p, k), diff(std::pow(pd, k), std::pow(pd, k)));
  }
  HellingerResult res;
  res.distance_sq = std::clamp(acc, 0.0, 1.0);
  res.affinity = 1.0 - res.distance_sq;
  return res;
}

inline HellingerResult hellinger_affinity(const Law1D& mu, const Law1D& nu) {
  if (mu.index() != nu.index()) throw std::invalid_argument("laws on different base fields");
  if (const auto* a = std::get_if<RealLaw1D>(&mu)) return hellinger_affinity(*a, std::get<RealLaw1D>(nu));
  return hellinger_affinity(std::get<PadicLaw1D>(mu), std::get<PadicLaw1D>(nu));
}

enum class Verdict { equivalent, singular, undecided };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::equivalent: return "EQUIVALENT";
    case Verdict::singular: return "SINGULAR";
    case Verdict::undecided: return "UNDECIDED";
  }
  return "UNDECIDED";
}

struct KakutaniStep {
  std::size_t k = 0;
  double affinity = 1.0;
  double decrement = 0.0;  // -log(affinity)
  double log_partial = 0.0;
  double partial_product = 1.0;
};

struct KakutaniOptions {
  std::size_t cutoff = 4096;
  /// lower bound for the limit of the partial products to call EQUIVALENT
  double threshold = 1e-3;
  /// log partial sum below which the product is called SINGULAR
  double log_floor = -30.0;
  /// variation bound over the last quarter of the trajectory
  double stability = 1e-6;
  /// dyadic block-sum ratios: at or above -> diverging, at or below -> converging
  double diverging_ratio = 0.95;
  double converging_ratio = 0.85;
};

struct KakutaniResult {
  Verdict verdict = Verdict::undecided;
  std::string reason;
  double limit_estimate = 1.0;
  double block_ratio = 0.0;
  std::vector<KakutaniStep> trajectory;
};

/// Decides whether prod_k mu_k and prod_k nu_k are equivalent or singular
/// from the partial products of the coordinate affinities.
///
/// The log partial sums are sums of nonnegative decrements d_k. Beyond the
/// fixed floor, convergence is judged by Cauchy condensation: the dyadic
/// block sums S_J = sum_{2^J <= k < 2^{J+1}} d_k shrink geometrically for
/// a convergent series of eventually monotone terms and stay bounded below
/// for a divergent one.
template <class PairAt>
  requires std::invocable<PairAt&, std::size_t>
KakutaniResult kakutani_dichotomy(PairAt&& pair_at, const KakutaniOptions& opt = {}) {
  if (opt.cutoff < 8) throw std::invalid_argument("Kakutani cutoff must be at least 8");
  KakutaniResult res;
  res.trajectory.reserve(opt.cutoff);
  double log_sum = 0.0;
  for (std::size_t k = 1; k <= opt.cutoff; ++k) {
    const auto [mu, nu] = pair_at(k);
    const HellingerResult h = hellinger_affinity(mu, nu);
    const double d = h.distance_sq >= 1.0 ? std::numeric_limits<double>::infinity() : -std::log1p(-h.distance_sq);
    log_sum -= d;
    res.trajectory.push_back({k, h.affinity, d, log_sum, std::exp(log_sum)});
    if (log_sum < opt.log_floor) {
      res.verdict = Verdict::singular;
      res.reason = "log partial sum below floor";
      res.limit_estimate = 0.0;
      return res;
    }
  }
  // dyadic block sums over complete blocks
  std::vector<double> blocks;
  for (std::size_t lo = 1; 2 * lo - 1 <= opt.cutoff; lo *= 2) {
    double s = 0.0;
    for (std::size_t k = lo; k < 2 * lo; ++k) s += res.trajectory[k - 1].decrement;
    blocks.push_back(s);
  }
  const std::size_t J = blocks.size() - 1;
  const double last = blocks[J];
  const double negligible = 1e-15 * std::max(1.0, -log_sum);
  double ratio = 0.0;
  if (last > negligible) {
    double acc = 0.0;
    int used = 0;
    for (std::size_t j = J; j + 3 > J && j >= 1; --j) {
      if (blocks[j - 1] > 0) {
        acc += blocks[j] / blocks[j - 1];
        ++used;
      }
    }
    ratio = used > 0 ? acc / used : std::numeric_limits<double>::infinity();
  }
  res.block_ratio = ratio;
  if (ratio >= opt.diverging_ratio) {
    res.verdict = Verdict::singular;
    res.reason = "dyadic block sums of log decrements do not shrink";
    res.limit_estimate = 0.0;
    return res;
  }
  const double tail = ratio > 0 ? last * ratio / (1.0 - ratio) : 0.0;
  res.limit_estimate = std::exp(log_sum - tail);
  // literal rule: last quarter of partial products varies by < stability
  const std::size_t q = opt.cutoff - opt.cutoff / 4;
  const double variation = res.trajectory[q - 1].partial_product - res.trajectory.back().partial_product;
  if (ratio <= opt.converging_ratio && res.limit_estimate > opt.threshold) {
    res.verdict = Verdict::equivalent;
    res.reason = "dyadic block sums shrink geometrically";
  } else if (variation < opt.stability && res.trajectory.back().partial_product > opt.threshold) {
    res.verdict = Verdict::equivalent;
    res.reason = "partial products stable over the last quarter";
  } else {
    res.verdict = Verdict::undecided;
    res.reason = "no stopping rule applies at this cutoff";
  }
  return res;
}

/// Convenience overload for an explicit finite list of pairs.
inline KakutaniResult kakutani_dichotomy(const std::vector<std::pair<Law1D, Law1D>>& pairs,
                                         KakutaniOptions opt = {}) {
  opt.cutoff = pairs.size();
  return kakutani_dichotomy([&](std::size_t k) { return pairs[k - 1]; }, opt);
}

/// A named product-measure pair sequence with its known classification.
struct KakutaniFixture {
  std::string name;
  std::function<std::pair<Law1D, Law1D>(std::size_t)> pair_at;
  Verdict expected;
};

/// The canned sequences: Gaussian mean shifts, the scaled Gaussians
/// C_k exp(-x^2 s_k^2) with s_k = k^{b'} shifted by k^{-b}, variance changes,
/// a uniform family, and the p-adic laws F_k exp(-|y|^2 p^{2k}) with shifts.
inline std::vector<KakutaniFixture> canned_kakutani_fixtures() {
  std::vector<KakutaniFixture> f;
  const auto shift = [](std::string name, std::function<double(double)> a, Verdict v) {
    return KakutaniFixture{std::move(name),
                           [a](std::size_t k) {
                             const double kd = static_cast<double>(k);
                             return std::pair<Law1D, Law1D>{RealLaw1D::gaussian(0, 1), RealLaw1D::gaussian(a(kd), 1)};
                           },
                           v};
  };
  using V = Verdict;
  f.push_back(shift("gauss_identical", [](double) { return 0.0; }, V::equivalent));
  f.push_back(shift("gauss_shift_2^-k", [](double k) { return std::pow(2.0, -k); }, V::equivalent));
  f.push_back(shift("gauss_shift_3^-k", [](double k) { return std::pow(3.0, -k); }, V::equivalent));
  f.push_back(shift("gauss_shift_1/k", [](double k) { return 1.0 / k; }, V::equivalent));
  f.push_back(shift("gauss_shift_3/k", [](double k) { return 3.0 / k; }, V::equivalent));
  f.push_back(shift("gauss_shift_1/k^2", [](double k) { return 1.0 / (k * k); }, V::equivalent));
  f.push_back(shift("gauss_shift_k^-0.75", [](double k) { return std::pow(k, -0.75); }, V::equivalent));
  f.push_back(shift("gauss_shift_1/sqrt(k)", [](double k) { return 1.0 / std::sqrt(k); }, V::singular));
  f.push_back(shift("gauss_shift_const_1", [](double) { return 1.0; }, V::singular));
  f.push_back(shift("gauss_shift_k^-0.25", [](double k) { return std::pow(k, -0.25); }, V::singular));
  f.push_back(shift("gauss_shift_0.5k^-0.4", [](double k) { return 0.5 * std::pow(k, -0.4); }, V::singular));

  const auto scaled = [](std::string name, double bprime, double b, Verdict v) {
    return KakutaniFixture{std::move(name),
                           [bprime, b](std::size_t k) {
                             const double kd = static_cast<double>(k);
                             const double s = std::pow(kd, bprime);
                             return std::pair<Law1D, Law1D>{RealLaw1D::gaussian_scale(0, s),
                                                            RealLaw1D::gaussian_scale(std::pow(kd, -b), s)};
                           },
                           v};
  };
  f.push_back(scaled("lambda_k_b'=1.5_b=2.5", 1.5, 2.5, V::equivalent));
  f.push_back(scaled("lambda_k_b'=1.5_b=3", 1.5, 3.0, V::equivalent));
  f.push_back(scaled("lambda_k_b'=1.5_b=1.75", 1.5, 1.75, V::singular));

  f.push_back({"gauss_sd_1+1/k",
               [](std::size_t k) {
                 return std::pair<Law1D, Law1D>{RealLaw1D::gaussian(0, 1),
                                                RealLaw1D::gaussian(0, 1.0 + 1.0 / static_cast<double>(k))};
               },
               V::equivalent});
  f.push_back({"gauss_sd_1+k^-0.5",
               [](std::size_t k) {
                 return std::pair<Law1D, Law1D>{RealLaw1D::gaussian(0, 1),
                                                RealLaw1D::gaussian(0, 1.0 + 1.0 / std::sqrt(static_cast<double>(k)))};
               },
               V::singular});
  f.push_back({"uniform_width_1+1/k^2",
               [](std::size_t k) {
                 const double kd = static_cast<double>(k);
                 return std::pair<Law1D, Law1D>{RealLaw1D::uniform(0, 1), RealLaw1D::uniform(0, 1.0 + 1.0 / (kd * kd))};
               },
               V::equivalent});

  const auto eta = [](std::string name, int p, int shift_mult, int shift_add, Verdict v) {
    return KakutaniFixture{std::move(name),
                           [p, shift_mult, shift_add](std::size_t k) {
                             const int kk = static_cast<int>(k);
                             // |z_k| = p^{-(shift_mult k + shift_add)}
                             const PAdicNumber z = PAdicNumber::from_digits(p, shift_mult * kk + shift_add, {1});
                             return std::pair<Law1D, Law1D>{PadicLaw1D::gaussian_analog(p, 1.0, kk),
                                                            PadicLaw1D::gaussian_analog(p, 1.0, kk, z)};
                           },
                           v};
  };
  f.push_back(eta("eta_k_p=3_|z|=p^-k", 3, 1, 0, V::singular));
  f.push_back(eta("eta_k_p=3_|z|=p^-2k", 3, 2, 0, V::equivalent));
  f.push_back(eta("eta_k_p=2_|z|=p^-(k+1)", 2, 1, 1, V::singular));
  return f;
}

}  // namespace cfgspace
