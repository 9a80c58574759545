#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cfgspace/measure.hpp"
#include "support.hpp"

namespace cfgspace {
namespace {

using cfgspace::testing::random_ball_permutation;
using cfgspace::testing::random_padic_point;

Box interval(double lo, double hi) { return Box{{lo}, {hi}}; }

// Normal CDF with variance lambda / 2, i.e. density exp(-x^2 / lambda) / sqrt(pi lambda).
double oracle_cdf(double x, double lambda) { return 0.5 * std::erfc(-x / std::sqrt(lambda)); }

TEST(GaussianShiftFactor, SpecExamples) {
  EXPECT_EQ(gaussian_shift_factor({0.0}, {0.3}, {1.0}).value, 1.0);
  EXPECT_EQ(gaussian_shift_factor({1.0}, {0.0}, {1.0}).value, std::exp(-1.0));
  const auto big = gaussian_shift_factor({100.0}, {100.0}, {1.0});
  EXPECT_TRUE(big.saturated);
  EXPECT_FALSE(gaussian_shift_factor({0.5, 0.2}, {0.1, 0.1, 0.1}, {1.0, 2.0, 3.0}).saturated);
  EXPECT_THROW(gaussian_shift_factor({1, 1}, {0}, {1, 1}), std::invalid_argument);
}

// Closed form: the ratio of the shifted density to the unshifted one.
TEST(GaussianShiftFactor, EqualsDensityRatio) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3, 3), l(0.2, 4);
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> lam{l(rng), l(rng)}, z{u(rng), u(rng)}, x{u(rng), u(rng)};
    const auto m = MeasureModel<RealSpace>::gaussian(lam);
    const std::vector<double> xz{x[0] - z[0], x[1] - z[1]};
    ASSERT_NEAR(gaussian_shift_factor(z, x, lam).value / (m.density(xz) / m.density(x)), 1.0, 1e-12);
  }
}

// Monte Carlo: histogram of shifted draws over histogram of unshifted draws.
TEST(GaussianShiftFactor, MatchesEmpiricalHistogramRatio) {
  const double lambda = 2.0, z = 0.5;
  const double sd = std::sqrt(lambda / 2);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n0(0.0, sd), nz(z, sd);
  const int bins = 16;
  std::vector<double> h0(bins), hz(bins);
  const std::size_t draws = 2000000;
  for (std::size_t i = 0; i < draws; ++i) {
    const double a = n0(rng), b = nz(rng);
    if (a >= -2 && a < 2) h0[static_cast<int>((a + 2) / 4 * bins)] += 1;
    if (b >= -2 && b < 2) hz[static_cast<int>((b + 2) / 4 * bins)] += 1;
  }
  for (int k = 0; k < bins; ++k) {
    const double lo = -2 + 4.0 * k / bins, hi = lo + 4.0 / bins;
    // bin-averaged factor from the exact bin masses
    const double expected = (oracle_cdf(hi - z, lambda) - oracle_cdf(lo - z, lambda)) /
                            (oracle_cdf(hi, lambda) - oracle_cdf(lo, lambda));
    const double mid = 0.5 * (lo + hi);
    EXPECT_NEAR(hz[k] / h0[k] / expected, 1.0, 0.05) << "bin " << k;
    EXPECT_NEAR(gaussian_shift_factor({z}, {mid}, {lambda}).value / expected, 1.0, 0.05) << "bin " << k;
  }
}

TEST(MeasureModel, MassesAndDensities) {
  const auto leb = MeasureModel<RealSpace>::lebesgue(2, 1.5);
  EXPECT_DOUBLE_EQ(leb.mass(Box{{0, 0}, {2, 3}}), 9.0);
  EXPECT_TRUE(std::isinf(leb.total_mass()));
  const auto g = MeasureModel<RealSpace>::gaussian({1.0});
  EXPECT_NEAR(g.mass(interval(-1, 1)), oracle_cdf(1, 1) - oracle_cdf(-1, 1), 1e-14);
  EXPECT_NEAR(g.mass(interval(-40, 40)), 1.0, 1e-14);
  const auto s = MeasureModel<RealSpace>::sum({leb.lebesgue(1), g}, {2.0, 3.0});
  EXPECT_TRUE(s.is_sum());
  EXPECT_NEAR(s.mass(interval(0, 1)), 2.0 + 3.0 * g.mass(interval(0, 1)), 1e-14);
  EXPECT_NEAR(s.density({0.2}), 2.0 + 3.0 * g.density({0.2}), 1e-14);
  const PadicSpace sp{3, 2};
  const auto h = MeasureModel<PadicSpace>::haar(sp, 2.0);
  EXPECT_EQ(h.mass(sp.ball_at_origin(1)), 2.0 / 9.0);
  EXPECT_EQ(h.mass(sp.ball_at_origin(-1)), 18.0);
  EXPECT_THROW(MeasureModel<RealSpace>::gaussian({0.0}), std::invalid_argument);
}

TEST(MeasureModel, NonatomicAndIncreasingAlongExhaustion) {
  const auto leb = MeasureModel<RealSpace>::lebesgue(1);
  EXPECT_LT(leb.mass(interval(0.5, 0.5 + 1e-12)), 1e-11);
  const RealSpace r{1};
  const auto e = make_exhaustion(r, 5);
  for (std::size_t i = 1; i < e.size(); ++i) EXPECT_GT(leb.mass(e[i]), leb.mass(e[i - 1]));
  const PadicSpace sp{2, 1};
  const auto h = MeasureModel<PadicSpace>::haar(sp);
  EXPECT_EQ(h.mass(PadicBall{{sp.number(5)}, 40}), std::pow(2.0, -40));
  const auto pe = make_exhaustion(sp, 5);
  for (std::size_t i = 1; i < pe.size(); ++i) EXPECT_GT(h.mass(pe[i]), h.mass(pe[i - 1]));
}

TEST(PadicGaussianNormalizer, MatchesDirectShellSum) {
  for (int p : {2, 3, 5}) {
    for (double s : {0.1, 1.0, 7.0}) {
      double total = std::pow(p, -61.0);
      for (int k = -60; k <= 60; ++k)
        total += std::exp(-std::pow(p, 2.0 * k) * s) * std::pow(p, k) * (1.0 - 1.0 / p);
      EXPECT_NEAR(padic_gaussian_normalizer(s, p, 40).normalizer * total, 1.0, 1e-12) << p << " " << s;
    }
  }
}

TEST(PadicGaussianNormalizer, NondecreasingInScale) {
  double prev = 0.0;
  for (double s = 0.01; s < 1000; s *= 1.7) {
    const double f = padic_gaussian_normalizer(s, 3, 40).normalizer;
    EXPECT_GE(f, prev);
    prev = f;
  }
  EXPECT_THROW(padic_gaussian_normalizer(-1, 3, 40), std::invalid_argument);
  EXPECT_THROW(padic_gaussian_normalizer(1e-30, 3, 2), std::invalid_argument);
}

TEST(PadicGaussian, ProbabilityAndSamplerFrequency) {
  const PadicSpace sp{3, 1};
  const auto m = MeasureModel<PadicSpace>::padic_gaussian(sp, {1.0});
  EXPECT_NEAR(m.mass(sp.ball_at_origin(-30)), 1.0, 1e-12);
  const double unit = m.mass(sp.ball_at_origin(0));
  const auto window = sp.ball_at_origin(-6);
  const double expected = unit / m.mass(window);
  auto rng = shard_rng(3, 0);
  const std::size_t n = 100000;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (sp.ball_at_origin(0).contains(m.sample(window, rng))) ++hits;
  const double freq = static_cast<double>(hits) / n;
  EXPECT_NEAR(freq, expected, 3.0 * std::sqrt(expected * (1 - expected) / n));
}

TEST(Sampler, GaussianPassesChiSquareGoodnessOfFit) {
  const double lambda = 1.5;
  const auto m = MeasureModel<RealSpace>::gaussian({lambda});
  const Box w = interval(-2, 3);
  auto rng = shard_rng(4, 0);
  const int bins = 20;
  std::vector<double> obs(bins), exp(bins);
  const std::size_t n = 200000;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = m.sample(w, rng)[0];
    obs[std::min(bins - 1, static_cast<int>((x + 2) / 5 * bins))] += 1;
  }
  const double total = oracle_cdf(3, lambda) - oracle_cdf(-2, lambda);
  for (int k = 0; k < bins; ++k) {
    const double lo = -2 + 5.0 * k / bins, hi = lo + 5.0 / bins;
    exp[k] = n * (oracle_cdf(hi, lambda) - oracle_cdf(lo, lambda)) / total;
  }
  EXPECT_GT(chi_square_gof(obs, exp).p_value, 1e-3);
}

TEST(Sampler, HaarIsUniformOverChildBalls) {
  const PadicSpace sp{5, 1};
  const auto m = MeasureModel<PadicSpace>::haar(sp);
  auto rng = shard_rng(5, 0);
  const auto kids = sp.ball_at_origin(0).children();
  std::vector<double> obs(kids.size()), exp(kids.size(), 50000.0 / kids.size());
  for (int i = 0; i < 50000; ++i) {
    const auto x = m.sample(sp.ball_at_origin(0), rng);
    for (std::size_t k = 0; k < kids.size(); ++k)
      if (kids[k].contains(x)) obs[k] += 1;
  }
  EXPECT_GT(chi_square_gof(obs, exp).p_value, 1e-3);
}

TEST(RhoFactor, IdentityIsOne) {
  const auto m = MeasureModel<RealSpace>::gaussian({1.0});
  for (double x : {-2.0, 0.0, 0.7}) EXPECT_EQ(rho_factor(m, Transformation<RealSpace>::identity(), {x}), 1.0);
}

TEST(RhoFactor, PadicBallPermutationIsExactlyOneForHaar) {
  std::mt19937_64 rng(6);
  const PadicSpace sp{3, 1};
  const auto m = MeasureModel<PadicSpace>::haar(sp);
  for (int i = 0; i < 200; ++i) {
    const auto psi = random_ball_permutation(sp, 2, rng);
    for (int j = 0; j < 20; ++j) ASSERT_EQ(rho_factor(m, psi, random_padic_point(sp, rng)), 1.0);
  }
}

TEST(RhoFactor, PiecewiseDoublingSpecExample) {
  const auto m = MeasureModel<RealSpace>::lebesgue(1);
  const auto psi = build_piecewise_affine({0, 1, 3}, {0, 2, 3});
  EXPECT_DOUBLE_EQ(rho_factor(m, psi, {0.5}), 0.5);
  EXPECT_DOUBLE_EQ(rho_factor(m, psi, {1.9}), 0.5);
  EXPECT_DOUBLE_EQ(rho_factor(m, psi, {2.5}), 2.0);
  EXPECT_DOUBLE_EQ(rho_factor(m, psi, {4.0}), 1.0);
}

// The density of the image of Lebesgue under psi is rho.
TEST(RhoFactor, MatchesHistogramOfPushedForwardSamples) {
  const auto psi = build_piecewise_affine({0, 1, 3}, {0, 2, 3});
  const auto m = MeasureModel<RealSpace>::lebesgue(1);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 3);
  const int bins = 12;
  std::vector<double> h(bins);
  const std::size_t n = 600000;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = psi.apply({u(rng)})[0];
    h[std::min(bins - 1, static_cast<int>(y / 3 * bins))] += 1;
  }
  for (int k = 0; k < bins; ++k) {
    const double density = h[k] / n * 3.0 / (3.0 / bins);
    EXPECT_NEAR(density, rho_factor(m, psi, {(k + 0.5) * 3.0 / bins}), 0.03) << "bin " << k;
  }
}

TEST(RhoFactor, CocycleIdentity) {
  std::mt19937_64 rng(8);
  const auto m = MeasureModel<RealSpace>::gaussian({1.3});
  const auto psi = build_piecewise_affine({-1, 0.2, 2}, {-1, 1.1, 2});
  const auto phi = Transformation<RealSpace>::flow_step({TentFlow1D(-2, 0, 1.5, 0.8, 0.7)});
  const auto both = compose(psi, phi);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 10000; ++i) {
    const std::vector<double> x{u(rng)};
    const double lhs = rho_factor(m, both, x);
    const double rhs = rho_factor(m, psi, x) * rho_factor(m, phi, psi.apply_inverse(x));
    ASSERT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, lhs));
  }
  const PadicSpace sp{2, 1};
  const auto mp = MeasureModel<PadicSpace>::padic_gaussian(sp, {0.5});
  for (int i = 0; i < 500; ++i) {
    const auto a = random_ball_permutation(sp, 3, rng), b = random_ball_permutation(sp, 3, rng);
    const auto x = random_padic_point(sp, rng);
    // density ratios round, so only the Haar case is exact
    const double lhs = rho_factor(mp, compose(a, b), x);
    ASSERT_NEAR(lhs, rho_factor(mp, a, x) * rho_factor(mp, b, a.apply_inverse(x)), 1e-14 * lhs);
  }
}

TEST(QuasiInvarianceDiagnostic, IdentityIsZero) {
  const auto m = MeasureModel<RealSpace>::gaussian({1.0});
  auto rng = shard_rng(9, 0);
  const auto d = quasi_invariance_diagnostic(m, Transformation<RealSpace>::identity(), interval(-5, 5), 1000, rng);
  EXPECT_EQ(d.estimate, 0.0);
  EXPECT_THROW(quasi_invariance_diagnostic(m, Transformation<RealSpace>::identity(), interval(-5, 5), 0, rng),
               std::invalid_argument);
}

TEST(QuasiInvarianceDiagnostic, PadicTranslationMovesTheLevelOffItself) {
  const PadicSpace sp{3, 1};
  const auto m = MeasureModel<PadicSpace>::haar(sp);
  const int n = 1;
  const auto kn = sp.ball_at_origin(-n);  // B(0, p^n)
  // shift of norm p^{n+1}, a translation of the ball B(0, p^{n+1})
  const auto psi = Transformation<PadicSpace>::padic_translation(sp.ball_at_origin(-(n + 1)), {sp.number(1, 9)});
  auto rng = shard_rng(10, 0);
  const auto d = quasi_invariance_diagnostic(m, psi, kn, 2000, rng);
  EXPECT_EQ(d.estimate, 0.0);
  EXPECT_EQ(d.moved_off_fraction, 1.0);
}

TEST(QuasiInvarianceDiagnostic, GaussianTranslationMatchesHellingerClosedForm) {
  const double lambda = 1.0, z = 0.8;
  const auto m = MeasureModel<RealSpace>::gaussian({lambda});
  const auto psi = Transformation<RealSpace>::translation({z});
  auto rng = shard_rng(11, 0);
  const auto d = quasi_invariance_diagnostic(m, psi, interval(-12, 12), 200000, rng);
  // 2 (1 - affinity) with affinity exp(-z^2 / (8 sigma^2)), sigma^2 = lambda / 2
  const double expected = 2.0 * (1.0 - std::exp(-z * z / (4.0 * lambda)));
  EXPECT_NEAR(d.estimate, expected, 3.0 * d.stderr_ + 1e-6);
}

}  // namespace
}  // namespace cfgspace
