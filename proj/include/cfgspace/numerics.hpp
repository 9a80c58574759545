#pragma once

// Quadrature, running statistics and goodness-of-fit helpers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace cfgspace {

using Rng = std::mt19937_64;

/// Independent stream for shard `shard` of a run seeded with `seed`.
inline Rng shard_rng(std::uint64_t seed, std::uint64_t shard) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(shard), static_cast<std::uint32_t>(shard >> 32), 0x5eedu};
  return Rng(seq);
}

inline constexpr double kQuadratureTolerance = 1e-9;

namespace detail {

template <class F>
double simpson_step(const F& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                    int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (!std::isfinite(delta)) return left + right;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b] to absolute tolerance tol.
template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol = kQuadratureTolerance, int max_depth = 48) {
  if (!(b > a)) return 0.0;
  // split into a few panels first so narrow features are not skipped
  constexpr int panels = 16;
  const double h = (b - a) / panels;
  double total = 0.0;
  for (int i = 0; i < panels; ++i) {
    const double lo = a + i * h, hi = (i + 1 == panels) ? b : a + (i + 1) * h;
    const double fa = f(lo), fb = f(hi), fm = f(0.5 * (lo + hi));
    const double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    total += detail::simpson_step(f, lo, hi, fa, fm, fb, whole, tol / panels, max_depth);
  }
  return total;
}

/// Integrates over consecutive intervals between sorted breakpoints with
/// adaptive Gauss-Kronrod, to relative tolerance tol on each piece. The rule
/// never evaluates the endpoints, where one-sided limits may differ.
template <class F>
double integrate_pieces(const F& f, std::vector<double> breaks, double tol = kQuadratureTolerance) {
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, breaks[i], breaks[i + 1], 20, tol);
  return total;
}

/// Welford accumulator for mean and standard error.
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  void merge(const RunningStats& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    const double n = static_cast<double>(n_ + o.n_);
    const double d = o.mean_ - mean_;
    mean_ += d * static_cast<double>(o.n_) / n;
    m2_ += o.m2_ + d * d * static_cast<double>(n_) * static_cast<double>(o.n_) / n;
    n_ += o.n_;
  }
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stderr_mean() const { return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Sample covariance of paired observations.
class RunningCovariance {
 public:
  void add(double x, double y) {
    ++n_;
    const double dx = x - mx_;
    mx_ += dx / static_cast<double>(n_);
    my_ += (y - my_) / static_cast<double>(n_);
    c_ += dx * (y - my_);
  }
  std::size_t count() const { return n_; }
  double covariance() const { return n_ > 1 ? c_ / static_cast<double>(n_ - 1) : 0.0; }

 private:
  std::size_t n_ = 0;
  double mx_ = 0.0, my_ = 0.0, c_ = 0.0;
};

inline double chi_square_sf(double statistic, double dof) {
  if (dof <= 0) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * statistic);
}

struct ChiSquareResult {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

/// Pearson goodness of fit of observed counts against expected counts. Bins
/// with expectation below `min_expected` are pooled into their neighbour.
inline ChiSquareResult chi_square_gof(const std::vector<double>& observed, const std::vector<double>& expected,
                                      double min_expected = 5.0, std::size_t fitted_params = 0) {
  if (observed.size() != expected.size()) throw std::invalid_argument("chi-square bins mismatch");
  std::vector<double> o, e;
  double po = 0.0, pe = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    po += observed[i];
    pe += expected[i];
    if (pe >= min_expected) {
      o.push_back(po);
      e.push_back(pe);
      po = pe = 0.0;
    }
  }
  if (pe > 0 || po > 0) {
    if (e.empty()) {
      o.push_back(po);
      e.push_back(pe);
    } else {
      o.back() += po;
      e.back() += pe;
    }
  }
  ChiSquareResult r;
  for (std::size_t i = 0; i < o.size(); ++i)
    if (e[i] > 0) r.statistic += (o[i] - e[i]) * (o[i] - e[i]) / e[i];
  r.dof = static_cast<double>(o.size()) - 1.0 - static_cast<double>(fitted_params);
  r.p_value = chi_square_sf(r.statistic, r.dof);
  return r;
}

/// Chi-square test of homogeneity for two histograms over the same bins.
inline ChiSquareResult chi_square_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("chi-square bins mismatch");
  double na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i];
    nb += b[i];
  }
  ChiSquareResult r;
  std::size_t used = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double tot = a[i] + b[i];
    if (tot <= 0) continue;
    ++used;
    const double ea = tot * na / (na + nb), eb = tot * nb / (na + nb);
    r.statistic += (a[i] - ea) * (a[i] - ea) / ea + (b[i] - eb) * (b[i] - eb) / eb;
  }
  r.dof = used > 0 ? static_cast<double>(used) - 1.0 : 0.0;
  r.p_value = chi_square_sf(r.statistic, r.dof);
  return r;
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic distribution.
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  KsResult r;
  if (a.empty() || b.empty()) return r;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    r.statistic = std::max(r.statistic, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  const double z = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * r.statistic;
  // Q_KS(z) = 2 sum (-1)^{k-1} exp(-2 k^2 z^2)
  if (z < 1e-3) {
    r.p_value = 1.0;
  } else {
    double q = 0.0;
    for (int k = 1; k <= 100; ++k) {
      const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * z * z);
      q += term;
      if (std::abs(term) < 1e-16) break;
    }
    r.p_value = std::clamp(q, 0.0, 1.0);
  }
  return r;
}

/// Poisson(mean) probability mass at n, computed in log space.
inline double poisson_pmf(double mean, std::size_t n) {
  if (mean == 0.0) return n == 0 ? 1.0 : 0.0;
  const double k = static_cast<double>(n);
  return std::exp(k * std::log(mean) - mean - std::lgamma(k + 1.0));
}

/// Smallest N with P(Poisson(mean) > N) < tail.
inline std::size_t poisson_truncation(double mean, double tail = 1e-12) {
  auto upper_tail = [mean](std::size_t n) {
    double upper = 0.0;
    for (std::size_t k = n + 1;; ++k) {
      const double t = poisson_pmf(mean, k);
      upper += t;
      if (static_cast<double>(k) > mean && t < 1e-20 * std::max(upper, 1e-300)) break;
      if (k > n + 100000) break;
    }
    return upper;
  };
  std::size_t n = static_cast<std::size_t>(mean);
  while (n > 0 && upper_tail(n - 1) < tail) --n;
  while (upper_tail(n) >= tail) ++n;
  return n;
}

}  // namespace cfgspace
