#pragma once

// Independent reference implementations used to check the library:
// brute-force assignment, a naive agglomeration and a brute-force identity
// correspondence. They favour obviousness over speed.

#include "adaptrack/core.hpp"
#include "adaptrack/hac.hpp"
#include "adaptrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

namespace adaptrack::oracle {

struct BruteAssignment {
  std::size_t assigned = 0;
  double cost = kInfinity;
};

/// Exhaustive search over all injections of the smaller side into the
/// larger: maximize the number of allowed pairs, then minimize their cost.
inline BruteAssignment brute_force_assignment(const Matrix& c) {
  const bool flip = c.rows() > c.cols();
  const Matrix m = flip ? Matrix(c.transpose()) : c;
  std::vector<int> cols(static_cast<std::size_t>(m.cols()));
  std::iota(cols.begin(), cols.end(), 0);
  BruteAssignment best{0, kInfinity};
  do {
    std::size_t count = 0;
    double sum = 0.0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const double v = m(r, cols[static_cast<std::size_t>(r)]);
      if (v == kInfinity) continue;
      ++count;
      sum += v;
    }
    if (count > best.assigned || (count == best.assigned && sum < best.cost)) best = {count, sum};
  } while (std::next_permutation(cols.begin(), cols.end()));
  if (best.assigned == 0) best.cost = 0.0;
  return best;
}

/// Uniform costs in [0,10); each entry is forbidden with `forbid_rate`.
inline Matrix random_cost_matrix(std::mt19937_64& rng, int rows, int cols, double forbid_rate) {
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::uniform_real_distribution<double> p(0.0, 1.0);
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = p(rng) < forbid_rate ? kInfinity : u(rng);
  }
  return m;
}

/// Agglomeration that recomputes every cluster-to-cluster average linkage
/// from the original item distances at each step.
inline std::vector<Merge> reference_merges(const Matrix& d, double theta, std::size_t target) {
  const std::size_t n = static_cast<std::size_t>(d.rows());
  std::vector<std::vector<std::size_t>> clusters(n);
  std::vector<int> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    clusters[i] = {i};
    ids[i] = static_cast<int>(i);
  }
  auto linkage = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    double sum = 0.0;
    for (std::size_t i : a) {
      for (std::size_t j : b) {
        const double v = d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (v == kInfinity) return kInfinity;
        sum += v;
      }
    }
    return sum / static_cast<double>(a.size() * b.size());
  };
  std::vector<Merge> merges;
  while (clusters.size() > std::max<std::size_t>(target, 1)) {
    double best = kInfinity;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      for (std::size_t j = 0; j < clusters.size(); ++j) {
        if (i == j) continue;
        const double v = linkage(clusters[i], clusters[j]);
        const auto key = std::minmax(ids[i], ids[j]);
        const auto best_key = std::minmax(ids[bi], ids[bj]);
        if (v < best - 1e-9 || (std::abs(v - best) <= 1e-9 && v != kInfinity && key < best_key)) {
          best = v;
          bi = i;
          bj = j;
        }
      }
    }
    if (best == kInfinity || best > theta) break;
    if (ids[bj] < ids[bi]) std::swap(bi, bj);
    merges.push_back({ids[bi], ids[bj], best});
    clusters[bi].insert(clusters[bi].end(), clusters[bj].begin(), clusters[bj].end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
    ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(bj));
  }
  return merges;
}

/// Symmetric distances in [0,10); each pair is cannot-link (+inf) with
/// `block_rate`.
inline Matrix random_distances(std::mt19937_64& rng, std::size_t n, double block_rate) {
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::uniform_real_distribution<double> p(0.0, 1.0);
  Matrix d = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < d.cols(); ++j) {
      d(i, j) = d(j, i) = p(rng) < block_rate ? kInfinity : u(rng);
    }
  }
  return d;
}

/// Best identity-true-positive count over every one-to-one GT/hypothesis
/// identity correspondence, found by recursion.
inline std::size_t brute_force_idtp(const FrameBoxes& hyp, const FrameBoxes& gt, double thr) {
  std::vector<int> gt_ids, hyp_ids;
  for (const auto& [f, boxes] : gt.frames) {
    for (const auto& b : boxes) gt_ids.push_back(b.id);
  }
  for (const auto& [f, boxes] : hyp.frames) {
    for (const auto& b : boxes) hyp_ids.push_back(b.id);
  }
  std::sort(gt_ids.begin(), gt_ids.end());
  gt_ids.erase(std::unique(gt_ids.begin(), gt_ids.end()), gt_ids.end());
  std::sort(hyp_ids.begin(), hyp_ids.end());
  hyp_ids.erase(std::unique(hyp_ids.begin(), hyp_ids.end()), hyp_ids.end());

  auto overlap = [&](int g, int h) {
    std::size_t n = 0;
    for (const auto& [f, gboxes] : gt.frames) {
      for (const auto& gb : gboxes) {
        if (gb.id != g) continue;
        for (const auto& hb : hyp.at(f)) {
          if (hb.id == h && iou(gb.box, hb.box) >= thr) ++n;
        }
      }
    }
    return n;
  };
  std::size_t best = 0;
  std::vector<bool> used(hyp_ids.size(), false);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t acc) {
    if (i == gt_ids.size()) {
      best = std::max(best, acc);
      return;
    }
    rec(i + 1, acc);  // leave this GT identity unmatched
    for (std::size_t h = 0; h < hyp_ids.size(); ++h) {
      if (used[h]) continue;
      used[h] = true;
      rec(i + 1, acc + overlap(gt_ids[i], hyp_ids[h]));
      used[h] = false;
    }
  };
  rec(0, 0);
  return best;
}

}  // namespace adaptrack::oracle
