#pragma once

// Poisson measures restricted to a finite-mass window: sampler, exact count
// law, consistency and superposition checks, the product quasi-invariance
// factor, the spherical function and scaling-singularity evidence.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfgspace/kakutani.hpp"
#include "cfgspace/measure.hpp"

namespace cfgspace {

inline bool same_cell(const Box& a, const Box& b) { return a.lo == b.lo && a.hi == b.hi; }
inline bool same_cell(const PadicBall& a, const PadicBall& b) {
  return a.radius_exp == b.radius_exp && a.dimension() == b.dimension() && a.contains(b.center);
}

/// P_{K, lambda m}: counts Poisson(lambda m(K)), points i.i.d. m_K / m(K).
template <class Space>
struct PoissonLaw {
  MeasureModel<Space> base;
  typename Space::Cell window;
  double scale = 1.0;

  double mean() const { return scale * base.mass(window); }
  double mass(const typename Space::Cell& c) const { return scale * base.mass(c); }
  const Space& space() const { return base.space(); }

  PoissonLaw with_scale(double s) const { return PoissonLaw{base, window, s}; }
  PoissonLaw with_window(typename Space::Cell w) const { return PoissonLaw{base, std::move(w), scale}; }
};

template <class Space>
PoissonLaw<Space> make_poisson_law(MeasureModel<Space> base, typename Space::Cell window, double scale = 1.0) {
  if (!(scale > 0) || !std::isfinite(scale)) throw std::invalid_argument("intensity scale must be positive");
  PoissonLaw<Space> law{std::move(base), std::move(window), scale};
  if (!std::isfinite(law.mean())) throw std::invalid_argument("window has infinite mass");
  return law;
}

namespace detail {

/// n i.i.d. points from m restricted to the window; a point that coincides
/// with an earlier one (a precision artefact) is drawn again.
template <class Space>
std::vector<typename Space::Point> iid_points(const MeasureModel<Space>& m, const typename Space::Cell& window,
                                              std::size_t n, Rng& rng) {
  std::vector<typename Space::Point> pts;
  pts.reserve(n);
  while (pts.size() < n) {
    auto x = m.sample(window, rng);
    const bool clash =
        std::any_of(pts.begin(), pts.end(), [&](const auto& y) { return same_point(m.space(), x, y); });
    if (!clash) pts.push_back(std::move(x));
  }
  return pts;
}

}  // namespace detail

template <class Space>
FiniteConfig<Space> poisson_sample(const PoissonLaw<Space>& law, Rng& rng) {
  const double mean = law.mean();
  if (mean == 0.0) return FiniteConfig<Space>::empty(law.space());
  std::poisson_distribution<std::size_t> count(mean);
  const std::size_t n = count(rng);
  return FiniteConfig<Space>(law.space(), detail::iid_points(law.base, law.window, n, rng));
}

/// A configuration of exactly n i.i.d. points of m_K / m(K) (the law m_n).
template <class Space>
FiniteConfig<Space> fixed_count_sample(const MeasureModel<Space>& m, const typename Space::Cell& window, std::size_t n,
                                       Rng& rng) {
  if (n > 0 && !(m.mass(window) > 0)) throw std::invalid_argument("fixed-count law on a null window");
  return FiniteConfig<Space>(m.space(), detail::iid_points(m, window, n, rng));
}

namespace detail {

inline bool cell_inside(const Box& outer, const Box& inner) { return outer.contains(inner); }
inline bool cell_inside(const PadicBall& outer, const PadicBall& inner) { return outer.contains(inner); }

}  // namespace detail

/// prod_i (lambda m(B_i))^{n_i} exp(-lambda m(B_i)) / n_i! for pairwise disjoint B_i.
template <class Space>
double count_probability(const PoissonLaw<Space>& law, const std::vector<typename Space::Cell>& regions,
                         const std::vector<std::size_t>& counts) {
  if (regions.size() != counts.size()) throw std::invalid_argument("one count per region required");
  for (std::size_t i = 0; i < regions.size(); ++i) {
    if (!detail::cell_inside(law.window, regions[i])) throw std::invalid_argument("region leaves the window");
    for (std::size_t j = 0; j < i; ++j)
      if (!regions[i].disjoint(regions[j])) throw std::invalid_argument("overlapping regions");
  }
  double logp = 0.0;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const double mu = law.mass(regions[i]);
    const double p = poisson_pmf(mu, counts[i]);
    if (p == 0.0) return 0.0;
    logp += std::log(p);
  }
  return std::exp(logp);
}

/// Counts of a restriction compared with the direct inner law.
struct ConsistencyReport {
  std::size_t samples = 0;
  double inner_mass = 0.0;
  double restricted_count_mean = 0.0;
  double direct_count_mean = 0.0;
  /// restricted counts against the exact Poisson(m(K_n)) law, bins 0..12 (12 = 12 or more)
  ChiSquareResult restricted_vs_exact;
  /// restricted counts against directly sampled inner counts
  ChiSquareResult restricted_vs_direct;
  /// pairwise distances inside restricted vs direct configurations
  KsResult pairwise_distances;
  /// covariance of N(K_n) and N(K_l \ K_n), with its z-score against 0
  double covariance = 0.0;
  double covariance_z = 0.0;
};

inline constexpr std::size_t kCountBins = 13;

/// Raw statistics of a consistency run; tallies from independent streams merge.
struct ConsistencyTally {
  std::size_t samples = 0;
  double inner_mass = 0.0;
  double outer_rest_mass = 0.0;
  std::vector<double> restricted = std::vector<double>(kCountBins);
  std::vector<double> direct = std::vector<double>(kCountBins);
  std::vector<double> dist_restricted, dist_direct;
  RunningStats cov_terms, restricted_counts, direct_counts;

  void merge(const ConsistencyTally& o) {
    samples += o.samples;
    for (std::size_t i = 0; i < kCountBins; ++i) {
      restricted[i] += o.restricted[i];
      direct[i] += o.direct[i];
    }
    dist_restricted.insert(dist_restricted.end(), o.dist_restricted.begin(), o.dist_restricted.end());
    dist_direct.insert(dist_direct.end(), o.dist_direct.begin(), o.dist_direct.end());
    cov_terms.merge(o.cov_terms);
    restricted_counts.merge(o.restricted_counts);
    direct_counts.merge(o.direct_counts);
  }
};

/// Samples the outer law, restricts to the inner window, and samples the inner
/// law directly, recording count histograms, pairwise distances and the
/// centered product of the counts on K_n and K_l \ K_n.
template <class Space>
ConsistencyTally consistency_tally(const PoissonLaw<Space>& outer, const typename Space::Cell& inner_window,
                                   std::size_t samples, Rng& rng) {
  if (!detail::cell_inside(outer.window, inner_window)) throw std::invalid_argument("inner window not nested");
  const PoissonLaw<Space> inner = outer.with_window(inner_window);
  ConsistencyTally t;
  t.samples = samples;
  t.inner_mass = inner.mean();
  t.outer_rest_mass = outer.mean() - t.inner_mass;
  const auto bin = [](std::size_t n) { return std::min(n, kCountBins - 1); };
  const auto collect = [](const FiniteConfig<Space>& g, std::vector<double>& out) {
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = i + 1; j < g.size(); ++j) out.push_back(Space::to_double(g.space().distance(g[i], g[j])));
  };
  for (std::size_t s = 0; s < samples; ++s) {
    const auto g = poisson_sample(outer, rng);
    const auto h = restrict(g, inner_window);
    const double a = static_cast<double>(h.size());
    const double b = static_cast<double>(g.size() - h.size());
    t.restricted[bin(h.size())] += 1;
    t.restricted_counts.add(a);
    t.cov_terms.add((a - t.inner_mass) * (b - t.outer_rest_mass));
    collect(h, t.dist_restricted);
    const auto d = poisson_sample(inner, rng);
    t.direct[bin(d.size())] += 1;
    t.direct_counts.add(static_cast<double>(d.size()));
    collect(d, t.dist_direct);
  }
  return t;
}

inline ConsistencyReport consistency_finalize(const ConsistencyTally& t) {
  if (t.samples < 2) throw std::invalid_argument("consistency check needs at least two samples");
  ConsistencyReport r;
  r.samples = t.samples;
  r.inner_mass = t.inner_mass;
  std::vector<double> expected(kCountBins);
  double below = 0.0;
  for (std::size_t n = 0; n + 1 < kCountBins; ++n) {
    expected[n] = static_cast<double>(t.samples) * poisson_pmf(t.inner_mass, n);
    below += poisson_pmf(t.inner_mass, n);
  }
  expected[kCountBins - 1] = static_cast<double>(t.samples) * std::max(0.0, 1.0 - below);
  r.restricted_vs_exact = chi_square_gof(t.restricted, expected);
  r.restricted_vs_direct = chi_square_two_sample(t.restricted, t.direct);
  r.pairwise_distances = ks_two_sample(t.dist_restricted, t.dist_direct);
  r.restricted_count_mean = t.restricted_counts.mean();
  r.direct_count_mean = t.direct_counts.mean();
  r.covariance = t.cov_terms.mean();
  r.covariance_z = t.cov_terms.stderr_mean() > 0 ? r.covariance / t.cov_terms.stderr_mean() : 0.0;
  return r;
}

template <class Space>
ConsistencyReport consistency_check(const PoissonLaw<Space>& outer, const typename Space::Cell& inner_window,
                                    std::size_t samples, Rng& rng) {
  if (samples < 2) throw std::invalid_argument("consistency check needs at least two samples");
  return consistency_finalize(consistency_tally(outer, inner_window, samples, rng));
}

/// Poisson law of the summed intensity lambda_1 m_1 + lambda_2 m_2.
template <class Space>
PoissonLaw<Space> superpose(const PoissonLaw<Space>& a, const PoissonLaw<Space>& b) {
  if (!same_cell(a.window, b.window)) throw std::invalid_argument("superposed laws need the same window");
  return PoissonLaw<Space>{MeasureModel<Space>::sum({a.base, b.base}, {a.scale, b.scale}), a.window, 1.0};
}

/// (gamma_1, gamma_2) -> gamma_1 union gamma_2.
template <class Space>
FiniteConfig<Space> convolve_samples(const FiniteConfig<Space>& a, const FiniteConfig<Space>& b) {
  return config_union(a, b);
}

/// A draw of n o P_m = P_m * m_n: a Poisson sample joined with n extra i.i.d. points.
template <class Space>
FiniteConfig<Space> fixed_count_convolution_sample(const PoissonLaw<Space>& law, std::size_t n, Rng& rng) {
  auto g = poisson_sample(law, rng);
  std::vector<typename Space::Point> pts = g.points();
  while (pts.size() < g.size() + n) {
    auto x = law.base.sample(law.window, rng);
    if (std::none_of(pts.begin(), pts.end(), [&](const auto& y) { return same_point(law.space(), x, y); }))
      pts.push_back(std::move(x));
  }
  return FiniteConfig<Space>(law.space(), std::move(pts));
}

/// rho_{P_m}(psi, gamma) = prod_{x in gamma} rho_m(psi, x); 1 for the empty configuration.
template <class Space>
double rho_poisson(const PoissonLaw<Space>& law, const Transformation<Space>& psi, const FiniteConfig<Space>& g) {
  double r = 1.0;
  for (const auto& x : g) r *= rho_factor(law.base, psi, x);
  return r;
}

// ---------------------------------------------------------------------------
// Spherical function u_m(psi) = exp(int (rho^{1/2} - 1) dm)

enum class SphericalMode { quadrature, monte_carlo };

struct SphericalEstimate {
  double value = 1.0;
  double stderr_ = 0.0;
  /// int (rho^{1/2} - 1) d(lambda m), quadrature mode only
  double integral = 0.0;
};

namespace detail {

/// Points where rho(psi, .) may fail to be smooth.
inline void rho_breakpoints(const Transformation<RealSpace>& psi, std::vector<double>& out) {
  switch (psi.kind()) {
    case TransformKind::real_piecewise_affine: {
      const auto& m = psi.affine_maps().at(0);
      const auto bp = m.breakpoints();
      for (double k : bp) {
        out.push_back(k);
        out.push_back(m.apply(k));
        out.push_back(m.apply_inverse(k));
      }
      break;
    }
    case TransformKind::real_flow_step: {
      const auto& f = psi.flows().at(0);
      for (double k : {f.a(), f.c(), f.b()}) {
        out.push_back(k);
        out.push_back(f.apply(k));
        out.push_back(f.apply_inverse(k));
      }
      break;
    }
    case TransformKind::composite: {
      const auto& outer = psi.child(0);
      std::vector<double> inner;
      rho_breakpoints(psi.child(1), inner);
      rho_breakpoints(outer, out);
      for (double x : inner) {
        out.push_back(x);
        out.push_back(outer.apply({x})[0]);
      }
      break;
    }
    default: break;
  }
}

/// If psi^{-1} acts on the whole ball b as x -> x + t, returns t.
inline std::optional<std::vector<PAdicNumber>> inverse_shift_on(const Transformation<PadicSpace>& psi,
                                                                 const PadicBall& b) {
  const std::size_t k = b.dimension();
  const int p = b.prime();
  const int prec = b.center.empty() ? kDefaultPrecision : b.center.front().precision();
  std::vector<PAdicNumber> zero(k, PAdicNumber::zero(p, prec));
  switch (psi.kind()) {
    case TransformKind::identity: return zero;
    case TransformKind::padic_ball_permutation: {
      const auto& balls = psi.balls();
      const auto& perm = psi.ball_perm();
      for (std::size_t i = 0; i < balls.size(); ++i) {
        if (balls[i].contains(b)) {
          // psi^{-1} sends ball i to ball perm^{-1}(i); the inverted map uses perm(i)
          const std::size_t j = psi.inverted() ? perm(i) : perm.inverse()(i);
          std::vector<PAdicNumber> t(k);
          for (std::size_t c = 0; c < k; ++c) t[c] = balls[j].center[c] - balls[i].center[c];
          return t;
        }
        if (!balls[i].disjoint(b)) return std::nullopt;
      }
      return zero;
    }
    case TransformKind::padic_translation: {
      const auto& w = psi.shift_window();
      if (w.contains(b)) {
        std::vector<PAdicNumber> t = psi.padic_shift();
        if (!psi.inverted())
          for (auto& c : t) c = -c;
        return t;
      }
      if (w.disjoint(b)) return zero;
      return std::nullopt;
    }
    case TransformKind::composite: {
      // psi^{-1} = inner^{-1} o outer^{-1}
      const auto t1 = inverse_shift_on(psi.child(0), b);
      if (!t1) return std::nullopt;
      PadicBall moved = b;
      for (std::size_t c = 0; c < k; ++c) moved.center[c] = b.center[c] + (*t1)[c];
      const auto t2 = inverse_shift_on(psi.child(1), moved);
      if (!t2) return std::nullopt;
      std::vector<PAdicNumber> t(k);
      for (std::size_t c = 0; c < k; ++c) t[c] = (*t1)[c] + (*t2)[c];
      return t;
    }
    default: return std::nullopt;
  }
}

/// int_b (rho^{1/2} - 1) dm by ball subdivision: exact on balls where psi^{-1}
/// is a translation and the density is constant on the ball and its image.
inline double padic_rho_integral(const MeasureModel<PadicSpace>& m, const Transformation<PadicSpace>& psi,
                                 const PadicBall& b, int depth) {
  const auto t = inverse_shift_on(psi, b);
  if (t) {
    PadicBall image = b;
    for (std::size_t c = 0; c < b.dimension(); ++c) image.center[c] = b.center[c] + (*t)[c];
    if (m.constant_on(b) && m.constant_on(image)) {
      const double d = m.density(b.center);
      const double dimg = m.density(image.center);
      return (std::sqrt(dimg * d) - d) * haar_volume(b);
    }
    bool all_zero = std::all_of(t->begin(), t->end(), [](const PAdicNumber& c) { return c.is_zero(); });
    if (all_zero) return 0.0;
  }
  if (depth <= 0) {
    // remaining ball is tiny; evaluate at its center
    const auto y = psi.apply_inverse(b.center);
    const double d = m.density(b.center);
    return (std::sqrt(m.density(y) * d) - d) * haar_volume(b);
  }
  double s = 0.0;
  for (const auto& c : b.children()) s += padic_rho_integral(m, psi, c, depth - 1);
  return s;
}

}  // namespace detail

/// int over the window of (rho^{1/2}(psi, x) - 1) m(dx), unscaled.
inline double rho_half_integral(const MeasureModel<RealSpace>& m, const Transformation<RealSpace>& psi,
                                const Box& window) {
  if (m.space().dim != 1) throw std::invalid_argument("quadrature mode supports one-dimensional real spaces");
  const double lo = window.lo[0], hi = window.hi[0];
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw std::invalid_argument("quadrature needs a bounded window");
  std::vector<double> br{lo, hi};
  detail::rho_breakpoints(psi, br);
  std::vector<double> inside;
  for (double x : br)
    if (x >= lo && x <= hi) inside.push_back(x);
  const auto f = [&](double x) {
    const std::vector<double> pt{x};
    const double d = m.density(pt);
    if (d == 0.0) return 0.0;
    return std::sqrt(rho_factor(m, psi, pt)) * d - d;
  };
  return integrate_pieces(f, inside, 1e-12);
}

inline double rho_half_integral(const MeasureModel<PadicSpace>& m, const Transformation<PadicSpace>& psi,
                                const PadicBall& window, int depth = 24) {
  return detail::padic_rho_integral(m, psi, window, depth);
}

template <class Space>
SphericalEstimate spherical_function(const PoissonLaw<Space>& law, const Transformation<Space>& psi,
                                     SphericalMode mode, std::size_t samples = 0, Rng* rng = nullptr) {
  if (!psi.preserves(law.window)) throw domain_error("transformation support exceeds the window");
  SphericalEstimate e;
  if (mode == SphericalMode::quadrature) {
    e.integral = law.scale * rho_half_integral(law.base, psi, law.window);
    e.value = std::exp(e.integral);
    return e;
  }
  if (samples == 0 || rng == nullptr) throw std::invalid_argument("Monte-Carlo mode needs samples and an RNG");
  RunningStats st;
  for (std::size_t s = 0; s < samples; ++s) st.add(std::sqrt(rho_poisson(law, psi, poisson_sample(law, *rng))));
  e.value = st.mean();
  e.stderr_ = st.stderr_mean();
  return e;
}

// ---------------------------------------------------------------------------
// Scaling singularity: P_{lambda_1 m} against P_{lambda_2 m}

/// Hellinger affinity of Poisson(a) and Poisson(b) by direct series summation.
inline double poisson_count_affinity(double a, double b) {
  if (a == b) return 1.0;
  const std::size_t top = poisson_truncation(std::max(a, b), 1e-16);
  double s = 0.0;
  for (std::size_t n = 0; n <= top; ++n) s += std::sqrt(poisson_pmf(a, n) * poisson_pmf(b, n));
  return std::min(1.0, s);
}

/// exp(-M (sqrt a - sqrt b)^2 / 2) for means a = lambda_1 M, b = lambda_2 M.
inline double poisson_count_affinity_closed_form(double a, double b) {
  const double d = std::sqrt(a) - std::sqrt(b);
  return std::exp(-0.5 * d * d);
}

struct ScalingLevel {
  double mass = 0.0;  // m(K_n)
  double affinity = 1.0;
  double affinity_closed_form = 1.0;
  double affinity_mc = 1.0;
  double affinity_mc_stderr = 0.0;
  double llr_mean = 0.0;  // E log(p_1 / p_2)(N) under P_{lambda_1 m}, exact
  double llr_var = 0.0;
  double llr_mean_mc = 0.0;
  double llr_var_mc = 0.0;
};

struct ScalingReport {
  double lambda1 = 1.0, lambda2 = 1.0;
  std::vector<ScalingLevel> levels;
  /// least-squares fit log(affinity) ~ intercept + slope * mass
  double slope = 0.0, intercept = 0.0;
  /// mass at which the fitted trend crosses the threshold (infinite if it never does)
  double mass_to_threshold = std::numeric_limits<double>::infinity();
  double threshold = 1e-6;
  /// whether the measured affinity at the last level is already below the threshold
  bool below_threshold_at_last_level = false;
  Verdict verdict = Verdict::undecided;
};

template <class Space>
ScalingReport scaling_singularity_evidence(const PoissonLaw<Space>& law, double lambda1, double lambda2,
                                           const std::vector<typename Space::Cell>& ladder, std::size_t samples,
                                           Rng& rng, double threshold = 1e-6) {
  if (!(lambda1 > 0) || !(lambda2 > 0)) throw std::invalid_argument("intensities must be positive");
  if (ladder.empty()) throw std::invalid_argument("empty window ladder");
  ScalingReport r;
  r.lambda1 = lambda1;
  r.lambda2 = lambda2;
  r.threshold = threshold;
  const double lr = std::log(lambda1 / lambda2);
  for (const auto& w : ladder) {
    ScalingLevel lv;
    lv.mass = law.base.mass(w);
    const double a = lambda1 * lv.mass, b = lambda2 * lv.mass;
    lv.affinity = poisson_count_affinity(a, b);
    lv.affinity_closed_form = poisson_count_affinity_closed_form(a, b);
    lv.llr_mean = a * lr - a + b;
    lv.llr_var = a * lr * lr;
    if (samples > 0) {
      const PoissonLaw<Space> p1{law.base, w, lambda1};
      RunningStats aff, llr;
      for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t n = poisson_sample(p1, rng).size();
        // log p_2(n) - log p_1(n) = n log(b/a) - b + a
        const double l21 = static_cast<double>(n) * -lr - b + a;
        aff.add(std::exp(0.5 * l21));
        llr.add(-l21);
      }
      lv.affinity_mc = aff.mean();
      lv.affinity_mc_stderr = aff.stderr_mean();
      lv.llr_mean_mc = llr.mean();
      lv.llr_var_mc = llr.variance();
    }
    r.levels.push_back(lv);
  }
  if (lambda1 == lambda2) {
    r.verdict = Verdict::equivalent;
    return r;
  }
  // fit the decay trend of the measured affinities
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (const auto& lv : r.levels) {
    if (!(lv.affinity > 0)) continue;
    const double y = std::log(lv.affinity);
    sx += lv.mass;
    sy += y;
    sxx += lv.mass * lv.mass;
    sxy += lv.mass * y;
    ++n;
  }
  const double nd = static_cast<double>(n);
  if (n >= 2 && nd * sxx - sx * sx > 0) {
    r.slope = (nd * sxy - sx * sy) / (nd * sxx - sx * sx);
    r.intercept = (sy - r.slope * sx) / nd;
    if (r.slope < 0) r.mass_to_threshold = (std::log(threshold) - r.intercept) / r.slope;
  }
  r.below_threshold_at_last_level = r.levels.back().affinity < threshold;
  r.verdict = (r.slope < 0 && std::isfinite(r.mass_to_threshold)) ? Verdict::singular : Verdict::undecided;
  return r;
}

}  // namespace cfgspace
