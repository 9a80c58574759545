#include <gtest/gtest.h>

#include <random>

#include "cfgspace/measure.hpp"
#include "cfgspace/transform.hpp"
#include "support.hpp"

namespace cfgspace {
namespace {

using cfgspace::testing::random_ball_permutation;
using cfgspace::testing::random_padic_point;
using RT = Transformation<RealSpace>;
using PT = Transformation<PadicSpace>;

TEST(Apply, IdentityFixesPoints) {
  EXPECT_EQ(RT::identity().apply({0.3, -2.0}), (std::vector<double>{0.3, -2.0}));
  const PadicSpace sp{3, 1};
  const PadicSpace::Point x{sp.number(7)};
  EXPECT_EQ(PT::identity().apply(x), x);
}

TEST(BallPermutation, SwapTranslatesCenters) {
  const PadicSpace sp{3, 1};
  const PadicBall o1{{sp.number(1)}, 1}, o2{{sp.number(2)}, 1};
  const auto swap = build_ball_permutation({o1, o2}, Permutation({1, 0}));
  for (long long v : {1LL, 4LL, 7LL, -2LL, 100LL}) {
    const PadicSpace::Point x{sp.number(v)};
    ASSERT_TRUE(o1.contains(x));
    EXPECT_EQ(swap.apply(x), (PadicSpace::Point{x[0] - o1.center[0] + o2.center[0]}));
    EXPECT_EQ(swap.apply(swap.apply(x)), x);
  }
  const PadicSpace::Point outside{sp.number(3)};
  EXPECT_EQ(swap.apply(outside), outside);
}

TEST(BallPermutation, ThreeCycleHasOrderThreeAndPreservesHaar) {
  const PadicSpace sp{5, 1};
  const PadicBall a{{sp.number(1)}, 1}, b{{sp.number(2)}, 1}, c{{sp.number(3)}, 1};
  const auto cyc = build_ball_permutation({a, b, c}, Permutation({1, 2, 0}));
  const auto m = MeasureModel<PadicSpace>::haar(sp);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10000; ++i) {
    const auto x = random_padic_point(sp, rng);
    ASSERT_EQ(cyc.apply(cyc.apply(cyc.apply(x))), x);
    if (a.contains(x)) {
      ASSERT_NE(cyc.apply(x), x);
    }
    ASSERT_EQ(rho_factor(m, cyc, x), 1.0);
  }
}

TEST(BallPermutation, IdentityPermutationIsIdentityMap) {
  const PadicSpace sp{3, 1};
  const auto id = build_ball_permutation({PadicBall{{sp.number(1)}, 1}, PadicBall{{sp.number(2)}, 1}},
                                         Permutation::identity(2));
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const auto x = random_padic_point(sp, rng);
    ASSERT_EQ(id.apply(x), x);
  }
  EXPECT_TRUE(id.support().cells.empty());
}

TEST(BallPermutation, RejectsBadBalls) {
  const PadicSpace sp{3, 1};
  EXPECT_THROW(build_ball_permutation({PadicBall{{sp.number(1)}, 1}, PadicBall{{sp.number(2)}, 2}},
                                      Permutation({1, 0})),
               std::invalid_argument);
  EXPECT_THROW(build_ball_permutation({PadicBall{{sp.number(1)}, 1}, PadicBall{{sp.number(4)}, 1}},
                                      Permutation({1, 0})),
               std::invalid_argument);
  EXPECT_THROW(build_ball_permutation({PadicBall{{sp.number(1)}, 1}}, Permutation({1, 0})), std::invalid_argument);
}

TEST(PiecewiseAffine, SpecExamples) {
  const auto id = build_piecewise_affine({0, 1, 3}, {0, 1, 3});
  EXPECT_EQ(id.apply({0.7}), (std::vector<double>{0.7}));
  const auto psi = build_piecewise_affine({0, 1, 3}, {0, 2, 3});
  EXPECT_DOUBLE_EQ(psi.apply({0.5})[0], 1.0);
  EXPECT_DOUBLE_EQ(psi.apply({2.0})[0], 2.5);
  EXPECT_DOUBLE_EQ(psi.apply({5.0})[0], 5.0);
  EXPECT_DOUBLE_EQ(psi.inverse_jacobian({1.0}), 0.5);
  EXPECT_DOUBLE_EQ(psi.inverse_jacobian({2.5}), 2.0);
  EXPECT_THROW(build_piecewise_affine({0, 2, 1}, {0, 1, 2}), std::invalid_argument);
  EXPECT_THROW(build_piecewise_affine({0, 1, 2}, {0, 1.5, 1}), std::invalid_argument);
  EXPECT_THROW(build_piecewise_affine({0, 1, 2}, {0, 1, 3}), std::invalid_argument);
}

TEST(PiecewiseAffine, RoundTripResidual) {
  std::mt19937_64 rng(3);
  const auto psi = build_piecewise_affine({-2, -0.5, 0.3, 1.7, 4}, {-2, 0.1, 0.2, 3.5, 4});
  std::uniform_real_distribution<double> u(-3, 5);
  for (int i = 0; i < 10000; ++i) {
    const double x = u(rng);
    ASSERT_NEAR(psi.apply_inverse(psi.apply({x}))[0], x, 1e-10);
    ASSERT_NEAR(psi.inverse().apply(psi.apply({x}))[0], x, 1e-10);
    ASSERT_NEAR(compose(psi, psi.inverse()).apply({x})[0], x, 1e-10);
  }
}

TEST(TentFlow, RoundTripAndSupport) {
  std::mt19937_64 rng(4);
  const auto f = RT::flow_step({TentFlow1D(-1, 0.5, 2, 1.2, 0.9)});
  std::uniform_real_distribution<double> u(-3, 4);
  for (int i = 0; i < 10000; ++i) {
    const double x = u(rng);
    ASSERT_NEAR(f.apply_inverse(f.apply({x}))[0], x, 1e-10);
    if (x < -1 || x > 2) {
      ASSERT_EQ(f.apply({x})[0], x);
    } else {
      ASSERT_GE(f.apply({x})[0], x);
    }
  }
  EXPECT_THROW(TentFlow1D(1, 0, 2, 1, 1), std::invalid_argument);
}

// Numerical derivative of psi^{-1} against the reported volume factor.
TEST(Jacobian, MatchesFiniteDifferences) {
  const auto f = RT::flow_step({TentFlow1D(-1, 0.5, 2, 1.2, 0.9)});
  const auto g = build_piecewise_affine({-2, 0, 3}, {-2, 1, 3});
  const auto h = compose(f, g);
  for (double x : {-1.7, -0.6, 0.2, 0.9, 1.4, 2.6}) {
    for (const auto* t : {&f, &g, &h}) {
      const double eps = 1e-6;
      const double fd = (t->apply_inverse({x + eps})[0] - t->apply_inverse({x - eps})[0]) / (2 * eps);
      EXPECT_NEAR(t->inverse_jacobian({x}), fd, 1e-5) << x;
    }
  }
}

TEST(Compose, GroupAxiomsPointwise) {
  std::mt19937_64 rng(5);
  const PadicSpace sp{3, 1};
  for (int i = 0; i < 300; ++i) {
    const auto a = random_ball_permutation(sp, 2, rng), b = random_ball_permutation(sp, 2, rng),
               c = random_ball_permutation(sp, 2, rng);
    const auto x = random_padic_point(sp, rng);
    ASSERT_EQ(compose(compose(a, b), c).apply(x), compose(a, compose(b, c)).apply(x));
    ASSERT_EQ(compose(a, PT::identity()).apply(x), a.apply(x));
    ASSERT_EQ(compose(a, a.inverse()).apply(x), x);
    ASSERT_EQ(compose(a, b).apply(x), a.apply(b.apply(x)));
    ASSERT_EQ(compose(a, b).inverse().apply(x), b.inverse().apply(a.inverse().apply(x)));
  }
}

TEST(Compose, DisjointSwapsCommute) {
  const PadicSpace sp{3, 1};
  const auto s1 = build_ball_permutation({PadicBall{{sp.number(1)}, 2}, PadicBall{{sp.number(4)}, 2}},
                                         Permutation({1, 0}));
  const auto s2 = build_ball_permutation({PadicBall{{sp.number(2)}, 2}, PadicBall{{sp.number(5)}, 2}},
                                         Permutation({1, 0}));
  std::mt19937_64 rng(6);
  for (int i = 0; i < 2000; ++i) {
    const auto x = random_padic_point(sp, rng);
    ASSERT_EQ(compose(s1, s2).apply(x), compose(s2, s1).apply(x));
  }
}

TEST(Compose, SupportIsContainedInUnionOfSupports) {
  std::mt19937_64 rng(7);
  const PadicSpace sp{2, 1};
  for (int i = 0; i < 100; ++i) {
    const auto a = random_ball_permutation(sp, 3, rng), b = random_ball_permutation(sp, 3, rng);
    const auto both = compose(a, b);
    const auto sa = a.support(), sb = b.support();
    for (int j = 0; j < 50; ++j) {
      const auto x = random_padic_point(sp, rng);
      if (!sa.contains(sp, x) && !sb.contains(sp, x)) {
        ASSERT_EQ(both.apply(x), x);
      }
    }
  }
  const auto r = compose(build_piecewise_affine({0, 1, 2}, {0, 1.5, 2}), build_piecewise_affine({5, 6, 7}, {5, 5.2, 7}));
  for (double x : {-1.0, 3.0, 4.9, 8.0}) EXPECT_EQ(r.apply({x})[0], x);
}

TEST(Preserves, WindowChecks) {
  const auto psi = build_piecewise_affine({0, 1, 3}, {0, 2, 3});
  EXPECT_TRUE(psi.preserves(Box{{-1}, {4}}));
  EXPECT_FALSE(psi.preserves(Box{{0.5}, {4}}));
  const PadicSpace sp{3, 1};
  const auto t = PT::padic_translation(sp.ball_at_origin(0), {sp.number(1)});
  EXPECT_TRUE(t.preserves(sp.ball_at_origin(0)));
  EXPECT_THROW(PT::padic_translation(sp.ball_at_origin(1), {sp.number(1)}), std::invalid_argument);
}

TEST(PadicTranslation, ActsOnWindowOnly) {
  const PadicSpace sp{3, 1};
  const auto t = PT::padic_translation(sp.ball_at_origin(0), {sp.number(1)});
  EXPECT_EQ(t.apply({sp.number(4)}), (PadicSpace::Point{sp.number(5)}));
  EXPECT_EQ(t.apply({sp.number(1, 3)}), (PadicSpace::Point{sp.number(1, 3)}));
  EXPECT_EQ(t.apply_inverse(t.apply({sp.number(7)})), (PadicSpace::Point{sp.number(7)}));
}

}  // namespace
}  // namespace cfgspace
