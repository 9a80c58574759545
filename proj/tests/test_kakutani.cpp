#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <map>

#include "cfgspace/kakutani.hpp"

namespace cfgspace {
namespace {

// Bhattacharyya coefficient of two normal laws.
double gaussian_affinity(double m1, double s1, double m2, double s2) {
  const double v = s1 * s1 + s2 * s2;
  return std::sqrt(2 * s1 * s2 / v) * std::exp(-(m1 - m2) * (m1 - m2) / (4 * v));
}

// Brute force over the residues of p^-M Z_p modulo p^D. Each residue class is
// a ball of equal Haar mass on which both densities are treated as constant;
// the normalizers are recomputed from the same sum, so the result does not
// depend on the library's shell formulas.
double padic_affinity_oracle(int p, double s1, double s2, int scale_exp, long long shift_num, int shift_val,
                             int M, int D) {
  long long n = 1;
  for (int i = 0; i < M + D; ++i) n *= p;
  long long zint = shift_num;  // z * p^M as an integer
  for (int i = 0; i < shift_val + M; ++i) zint *= p;
  const double w = std::pow(double(p), 2.0 * scale_exp);
  const auto abs_of = [&](long long a) {
    a = ((a % n) + n) % n;
    if (a == 0) return 0.0;
    int v = 0;
    while (a % p == 0) {
      a /= p;
      ++v;
    }
    return std::pow(double(p), M - v);
  };
  double g1 = 0, g2 = 0, cross = 0;
  for (long long a = 0; a < n; ++a) {
    const double t = abs_of(a), u = abs_of(a - zint);
    const double f1 = std::exp(-t * t * s1 * w), f2 = std::exp(-u * u * s2 * w);
    g1 += f1;
    g2 += f2;
    cross += std::sqrt(f1 * f2);
  }
  return cross / std::sqrt(g1 * g2);
}

TEST(Hellinger, RealClosedForms) {
  const auto aff = [](RealLaw1D a, RealLaw1D b) { return hellinger_affinity(a, b).affinity; };
  EXPECT_NEAR(aff(RealLaw1D::gaussian(0, 1), RealLaw1D::gaussian(0, 1)), 1.0, 1e-12);
  EXPECT_NEAR(aff(RealLaw1D::gaussian(0, 1), RealLaw1D::gaussian(2, 1)), std::exp(-0.5), 1e-9);
  EXPECT_NEAR(aff(RealLaw1D::uniform(0, 1), RealLaw1D::uniform(2, 3)), 0.0, 1e-12);
  for (double w : {1.01, 1.5, 3.0}) EXPECT_NEAR(aff(RealLaw1D::uniform(0, 1), RealLaw1D::uniform(0, w)), 1 / std::sqrt(w), 1e-9);
  for (auto [m1, s1, m2, s2] : std::vector<std::array<double, 4>>{
           {0, 1, 0, 2}, {1, 0.5, -1, 1.5}, {0, 1, 0.01, 1}, {3, 0.1, 3.05, 0.12}, {0, 1, 0, 1.001}})
    EXPECT_NEAR(aff(RealLaw1D::gaussian(m1, s1), RealLaw1D::gaussian(m2, s2)), gaussian_affinity(m1, s1, m2, s2),
                1e-9)
        << m1 << " " << s1 << " " << m2 << " " << s2;
}

TEST(Hellinger, SymmetricAndBounded) {
  const std::vector<RealLaw1D> laws{RealLaw1D::gaussian(0, 1), RealLaw1D::gaussian(0.3, 2),
                                    RealLaw1D::uniform(-1, 1), RealLaw1D::uniform(0, 4)};
  for (const auto& a : laws)
    for (const auto& b : laws) {
      const auto ab = hellinger_affinity(a, b), ba = hellinger_affinity(b, a);
      EXPECT_NEAR(ab.affinity, ba.affinity, 1e-10);
      EXPECT_LE(ab.affinity, 1.0);
      EXPECT_GE(ab.affinity, 0.0);
      EXPECT_NEAR(ab.affinity + ab.distance_sq, 1.0, 1e-12);
    }
}

TEST(Hellinger, PadicMatchesResidueEnumeration) {
  struct Case {
    int p;
    double s1, s2;
    int e;
    long long num;
    int val;
  };
  // M = 2 and D = 10 keep both the tails and the cell size far below 1e-9
  for (const Case& c : std::vector<Case>{{3, 1.0, 1.0, 0, 1, 0},
                                         {3, 1.0, 1.0, 0, 1, 1},
                                         {3, 1.0, 1.0, 0, 2, 2},
                                         {3, 1.0, 2.0, 0, 0, 0},
                                         {3, 0.7, 1.3, 0, 1, -1},
                                         {3, 0.05, 0.05, 1, 1, 0},
                                         {2, 1.0, 1.0, 0, 1, 0},
                                         {2, 0.5, 0.9, 0, 3, 1}}) {
    const int M = 2, D = c.p == 2 ? 16 : 10;
    const PAdicNumber z = c.num == 0 ? PAdicNumber::zero(c.p)
                                     : PAdicNumber::from_integer(c.num, c.p).shifted(c.val);
    const auto mu = PadicLaw1D::gaussian_analog(c.p, c.s1, c.e);
    const auto nu = PadicLaw1D::gaussian_analog(c.p, c.s2, c.e, z);
    const double oracle = padic_affinity_oracle(c.p, c.s1, c.s2, c.e, c.num, c.val, M, D);
    EXPECT_NEAR(hellinger_affinity(mu, nu).affinity, oracle, 1e-9) << c.p << " " << c.s1 << " " << c.num;
    EXPECT_NEAR(hellinger_affinity(nu, mu).affinity, oracle, 1e-9);
  }
}

TEST(Hellinger, RejectsMismatchedLaws) {
  EXPECT_THROW(hellinger_affinity(Law1D{RealLaw1D::gaussian(0, 1)}, Law1D{PadicLaw1D::gaussian_analog(3, 1)}),
               std::invalid_argument);
  EXPECT_THROW(hellinger_affinity(PadicLaw1D::gaussian_analog(3, 1), PadicLaw1D::gaussian_analog(5, 1)),
               std::invalid_argument);
  EXPECT_THROW(RealLaw1D::gaussian(0, 0), std::invalid_argument);
  EXPECT_THROW(RealLaw1D::uniform(1, 1), std::invalid_argument);
}

std::vector<std::pair<Law1D, Law1D>> shifts(std::size_t n, double (*a)(double)) {
  std::vector<std::pair<Law1D, Law1D>> v;
  for (std::size_t k = 1; k <= n; ++k)
    v.emplace_back(RealLaw1D::gaussian(0, 1), RealLaw1D::gaussian(a(static_cast<double>(k)), 1));
  return v;
}

TEST(Dichotomy, SpecExamples) {
  const auto geometric = kakutani_dichotomy(shifts(4096, [](double k) { return std::pow(2.0, -k); }));
  EXPECT_EQ(geometric.verdict, Verdict::equivalent);
  // prod exp(-a_k^2 / 8) with a_k = 2^-k
  double expected = 0;
  for (int k = 1; k < 60; ++k) expected += std::pow(4.0, -k) / 8;
  EXPECT_NEAR(geometric.limit_estimate, std::exp(-expected), 1e-9);

  const auto slow = kakutani_dichotomy(shifts(4096, [](double k) { return 1 / std::sqrt(k); }));
  EXPECT_EQ(slow.verdict, Verdict::singular);
  EXPECT_EQ(slow.limit_estimate, 0.0);

  const auto fixed = kakutani_dichotomy(shifts(64, [](double) { return 40.0; }));
  EXPECT_EQ(fixed.verdict, Verdict::singular);
  EXPECT_LT(fixed.trajectory.size(), 64u);
}

TEST(Dichotomy, TrajectoryIsConsistent) {
  const auto r = kakutani_dichotomy(shifts(512, [](double k) { return 1.0 / k; }));
  ASSERT_EQ(r.trajectory.size(), 512u);
  double log_sum = 0;
  for (std::size_t i = 0; i < r.trajectory.size(); ++i) {
    const auto& s = r.trajectory[i];
    EXPECT_EQ(s.k, i + 1);
    EXPECT_NEAR(s.affinity, std::exp(-1.0 / (8.0 * double(s.k * s.k))), 1e-9);
    EXPECT_GE(s.decrement, 0.0);
    log_sum -= s.decrement;
    EXPECT_NEAR(s.log_partial, log_sum, 1e-12);
    EXPECT_NEAR(s.partial_product, std::exp(log_sum), 1e-12);
    if (i > 0) {
      EXPECT_LE(s.partial_product, r.trajectory[i - 1].partial_product);
    }
  }
  EXPECT_THROW(kakutani_dichotomy(shifts(4, [](double) { return 1.0; })), std::invalid_argument);
}

// Independent classification: a Gaussian shift a_k ~ c k^-b gives a convergent
// product exactly when sum a_k^2 < inf, i.e. b > 1/2; geometric shifts always
// converge. The remaining families are decided by the known affinity rates.
TEST(Dichotomy, FixturesMatchOracleTable) {
  const std::map<std::string, Verdict> oracle{
      {"gauss_identical", Verdict::equivalent},
      {"gauss_shift_2^-k", Verdict::equivalent},
      {"gauss_shift_3^-k", Verdict::equivalent},
      {"gauss_shift_1/k", Verdict::equivalent},
      {"gauss_shift_3/k", Verdict::equivalent},
      {"gauss_shift_1/k^2", Verdict::equivalent},
      {"gauss_shift_k^-0.75", Verdict::equivalent},
      {"gauss_shift_1/sqrt(k)", Verdict::singular},
      {"gauss_shift_const_1", Verdict::singular},
      {"gauss_shift_k^-0.25", Verdict::singular},
      {"gauss_shift_0.5k^-0.4", Verdict::singular},
      // shift k^-b against standard deviation ~ k^-b': decrement ~ k^{2(b'-b)}
      {"lambda_k_b'=1.5_b=2.5", Verdict::equivalent},
      {"lambda_k_b'=1.5_b=3", Verdict::equivalent},
      {"lambda_k_b'=1.5_b=1.75", Verdict::singular},
      // sd ratio 1 + e: decrement ~ e^2 / 4
      {"gauss_sd_1+1/k", Verdict::equivalent},
      {"gauss_sd_1+k^-0.5", Verdict::singular},
      // 1 - 1/sqrt(1 + e) ~ e / 2 with e = 1/k^2
      {"uniform_width_1+1/k^2", Verdict::equivalent},
      // normalized shift p^{k-|.|}: constant when equal to the scale, p^-k below it
      {"eta_k_p=3_|z|=p^-k", Verdict::singular},
      {"eta_k_p=3_|z|=p^-2k", Verdict::equivalent},
      {"eta_k_p=2_|z|=p^-(k+1)", Verdict::singular},
  };
  const auto fixtures = canned_kakutani_fixtures();
  ASSERT_EQ(fixtures.size(), 20u);
  for (const auto& f : fixtures) {
    ASSERT_TRUE(oracle.count(f.name)) << f.name;
    EXPECT_EQ(f.expected, oracle.at(f.name)) << f.name;
    const auto r = kakutani_dichotomy(f.pair_at);
    EXPECT_EQ(r.verdict, f.expected) << f.name << " ratio " << r.block_ratio;
    EXPECT_NE(r.verdict, Verdict::undecided) << f.name;
  }
}

TEST(Dichotomy, PadicFixtureAffinities) {
  // at |z| equal to the scale the per-coordinate affinity is a fixed constant
  const auto f = canned_kakutani_fixtures();
  const auto it = std::find_if(f.begin(), f.end(), [](const auto& x) { return x.name == "eta_k_p=3_|z|=p^-k"; });
  ASSERT_NE(it, f.end());
  const auto [m1, n1] = it->pair_at(1);
  const auto [m5, n5] = it->pair_at(5);
  const double a1 = hellinger_affinity(m1, n1).affinity, a5 = hellinger_affinity(m5, n5).affinity;
  EXPECT_NEAR(a1, a5, 1e-12);
  EXPECT_NEAR(a1, padic_affinity_oracle(3, 1, 1, 0, 1, 0, 2, 10), 1e-9);
  EXPECT_LT(a1, 1.0);
}

}  // namespace
}  // namespace cfgspace
