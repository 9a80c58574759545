#pragma once

// Optimal assignment on square cost matrices: min-sum (Hungarian method with
// potentials) and min-max (bottleneck) variants.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace cfgspace {

template <class T>
using Matrix = std::vector<std::vector<T>>;

namespace detail {

template <class T>
std::size_t check_square(const Matrix<T>& cost) {
  const std::size_t n = cost.size();
  for (const auto& row : cost)
    if (row.size() != n) throw std::invalid_argument("assignment cost matrix is not square");
  return n;
}

}  // namespace detail

/// Row i is assigned to column result[i]; minimizes the sum of costs.
inline std::vector<std::size_t> min_cost_assignment(const Matrix<double>& cost) {
  const std::size_t n = detail::check_square(cost);
  if (n == 0) return {};
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays with a sentinel column 0
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match_col(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    match_col[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match_col[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match_col[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match_col[j0] = match_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> result(n);
  for (std::size_t j = 1; j <= n; ++j) result[match_col[j] - 1] = j - 1;
  return result;
}

namespace detail {

// Kuhn's augmenting-path matching restricted to edges allowed[i][j].
inline bool augment(std::size_t i, const Matrix<char>& allowed, std::vector<char>& seen,
                    std::vector<std::size_t>& col_owner) {
  const std::size_t n = allowed.size();
  for (std::size_t j = 0; j < n; ++j) {
    if (!allowed[i][j] || seen[j]) continue;
    seen[j] = 1;
    if (col_owner[j] == n || augment(col_owner[j], allowed, seen, col_owner)) {
      col_owner[j] = i;
      return true;
    }
  }
  return false;
}

inline bool perfect_matching(const Matrix<char>& allowed, std::vector<std::size_t>& row_to_col) {
  const std::size_t n = allowed.size();
  std::vector<std::size_t> col_owner(n, n);
  std::vector<char> seen(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(seen.begin(), seen.end(), 0);
    if (!augment(i, allowed, seen, col_owner)) return false;
  }
  row_to_col.assign(n, 0);
  for (std::size_t j = 0; j < n; ++j) row_to_col[col_owner[j]] = j;
  return true;
}

}  // namespace detail

/// Minimizes the largest assigned cost. Binary search over the sorted distinct
/// costs; each probe is a perfect-matching feasibility test. Only needs a
/// strict weak order on T, so exact cost types stay exact.
template <class T>
std::vector<std::size_t> bottleneck_assignment(const Matrix<T>& cost) {
  const std::size_t n = detail::check_square(cost);
  if (n == 0) return {};
  std::vector<T> values;
  values.reserve(n * n);
  for (const auto& row : cost) values.insert(values.end(), row.begin(), row.end());
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end(),
                           [](const T& a, const T& b) { return !(a < b) && !(b < a); }),
               values.end());

  Matrix<char> allowed(n, std::vector<char>(n));
  std::vector<std::size_t> best;
  auto feasible = [&](std::size_t k) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) allowed[i][j] = !(values[k] < cost[i][j]);
    return detail::perfect_matching(allowed, best);
  };
  // the largest value is always feasible
  std::size_t lo = 0, hi = values.size() - 1;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (feasible(mid)) hi = mid;
    else lo = mid + 1;
  }
  feasible(lo);
  return best;
}

}  // namespace cfgspace
