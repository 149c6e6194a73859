#pragma once

// Minimum-cost bipartite assignment (Kuhn-Munkres with potentials, O(n^2 m))
// over rectangular matrices. Entries equal to +infinity are forbidden: the
// solver first maximizes the number of permitted pairs, then minimizes cost.

#include "adaptrack/core.hpp"

#include <cmath>
#include <vector>

namespace adaptrack {

struct Assignment {
  std::vector<int> row_to_col;  // -1 when the row is unassigned
  double cost = 0.0;            // sum over assigned (permitted) pairs

  std::size_t assigned_count() const {
    std::size_t n = 0;
    for (int c : row_to_col) n += (c >= 0);
    return n;
  }
};

namespace detail {

// rows <= cols; every entry finite. Returns column per row.
inline std::vector<int> solve_dense(const Matrix& a) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(a.cols());
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInfinity);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInfinity;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  }
  return row_to_col;
}

}  // namespace detail

/// Solves the assignment problem for `cost` (+infinity marks forbidden
/// pairs). NaN or -infinity entries are rejected.
inline Assignment hungarian(const Matrix& cost) {
  const Eigen::Index rows = cost.rows();
  const Eigen::Index cols = cost.cols();
  Assignment result;
  result.row_to_col.assign(static_cast<std::size_t>(rows), -1);
  if (rows == 0 || cols == 0) return result;

  double lo = kInfinity;
  double hi = -kInfinity;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double c = cost(i, j);
      if (std::isnan(c) || c == -kInfinity) {
        throw Error(ErrorKind::numeric, "hungarian: NaN or -inf cost entry");
      }
      if (c == kInfinity) continue;
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
  }
  if (lo == kInfinity) return result;  // everything forbidden

  const double k = static_cast<double>(std::min(rows, cols));
  const double big = k * (hi - lo) + std::abs(hi) + std::abs(lo) + 1.0;
  Matrix dense = cost.unaryExpr([big](double c) { return c == kInfinity ? big : c; });

  const bool transposed = rows > cols;
  if (transposed) dense.transposeInPlace();
  const std::vector<int> solved = detail::solve_dense(dense);

  auto keep = [&](Eigen::Index r, Eigen::Index c) {
    if (cost(r, c) == kInfinity) return;
    result.row_to_col[static_cast<std::size_t>(r)] = static_cast<int>(c);
    result.cost += cost(r, c);
  };
  for (std::size_t i = 0; i < solved.size(); ++i) {
    if (solved[i] < 0) continue;
    if (transposed) {
      keep(solved[i], static_cast<Eigen::Index>(i));
    } else {
      keep(static_cast<Eigen::Index>(i), solved[i]);
    }
  }
  return result;
}

}  // namespace adaptrack
