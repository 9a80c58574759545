#pragma once

// Shared generators for the test binaries.

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "cfgspace/config.hpp"
#include "cfgspace/transform.hpp"

namespace cfgspace::testing {

/// A rational in Z_(p) with numerator up to `range`.
inline PAdicNumber random_padic(const PadicSpace& sp, std::mt19937_64& rng, long long range = 100000) {
  std::uniform_int_distribution<long long> num(-range, range), den(1, 50);
  long long d = den(rng);
  while (d % sp.prime == 0) d = den(rng);
  return sp.number(num(rng), d);
}

inline PadicSpace::Point random_padic_point(const PadicSpace& sp, std::mt19937_64& rng) {
  PadicSpace::Point x;
  for (std::size_t c = 0; c < sp.dim; ++c) x.push_back(random_padic(sp, rng));
  return x;
}

inline Permutation random_permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> im(n);
  std::iota(im.begin(), im.end(), std::size_t{0});
  std::shuffle(im.begin(), im.end(), rng);
  return Permutation(im);
}

/// All p^{dim * level} balls of radius p^{-level} inside the unit ball.
inline std::vector<PadicBall> unit_ball_partition(const PadicSpace& sp, int level) {
  std::vector<PadicBall> balls{sp.ball_at_origin(0)};
  for (int l = 0; l < level; ++l) {
    std::vector<PadicBall> next;
    for (const auto& b : balls)
      for (auto& c : b.children()) next.push_back(std::move(c));
    balls = std::move(next);
  }
  return balls;
}

/// A ball permutation of a random subset of the level-`level` partition.
inline Transformation<PadicSpace> random_ball_permutation(const PadicSpace& sp, int level, std::mt19937_64& rng) {
  auto balls = unit_ball_partition(sp, level);
  std::shuffle(balls.begin(), balls.end(), rng);
  std::uniform_int_distribution<std::size_t> size(2, balls.size());
  balls.resize(size(rng));
  const auto perm = random_permutation(balls.size(), rng);
  return build_ball_permutation(balls, perm);
}

/// n distinct points of the unit ball.
inline FiniteConfig<PadicSpace> random_padic_config(const PadicSpace& sp, std::size_t n, std::mt19937_64& rng) {
  std::vector<PadicSpace::Point> pts;
  while (pts.size() < n) {
    auto x = random_padic_point(sp, rng);
    if (std::find(pts.begin(), pts.end(), x) == pts.end()) pts.push_back(std::move(x));
  }
  return FiniteConfig<PadicSpace>(sp, std::move(pts));
}

}  // namespace cfgspace::testing
