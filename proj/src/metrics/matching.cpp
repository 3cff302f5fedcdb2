#include "layoutdm/metrics/matching.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace layoutdm {

Matching max_weight_matching(const WeightMatrix& w) {
  Matching result;
  result.row_to_col.assign(w.rows, -1);
  if (w.rows == 0 || w.cols == 0) return result;

  // The potential method needs rows <= cols; solve the transpose otherwise.
  const bool transposed = w.rows > w.cols;
  const std::size_t n = transposed ? w.cols : w.rows;
  const std::size_t m = transposed ? w.rows : w.cols;
  auto cost = [&](std::size_t i, std::size_t j) {
    return -(transposed ? w.at(j - 1, i - 1) : w.at(i - 1, j - 1));
  };

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> owner(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = owner[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  for (std::size_t j = 1; j <= m; ++j) {
    if (owner[j] == 0) continue;
    const std::size_t r = transposed ? j - 1 : owner[j] - 1;
    const std::size_t c = transposed ? owner[j] - 1 : j - 1;
    result.row_to_col[r] = static_cast<long>(c);
  }
  for (std::size_t r = 0; r < w.rows; ++r) {
    if (result.row_to_col[r] >= 0) result.total += w.at(r, static_cast<std::size_t>(result.row_to_col[r]));
  }
  return result;
}

Matching greedy_matching(const WeightMatrix& w) {
  Matching result;
  result.row_to_col.assign(w.rows, -1);
  std::vector<std::size_t> order(w.rows * w.cols);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return w.weights[a] > w.weights[b]; });
  std::vector<char> col_used(w.cols, 0);
  for (std::size_t idx : order) {
    const std::size_t r = idx / w.cols, c = idx % w.cols;
    if (result.row_to_col[r] >= 0 || col_used[c]) continue;
    result.row_to_col[r] = static_cast<long>(c);
    col_used[c] = 1;
    result.total += w.weights[idx];
  }
  return result;
}

}  // namespace layoutdm
