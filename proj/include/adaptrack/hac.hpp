#pragma once

// Bottom-up agglomerative clustering over a precomputed item distance
// matrix. Infinite entries mark pairs that may never share a cluster (for
// tracklets: frame overlap); the block propagates through every merge.

#include "adaptrack/core.hpp"

#include <string>
#include <vector>

namespace adaptrack {

enum class Linkage { average, single, complete };

inline Linkage parse_linkage(const std::string& s) {
  if (s == "average") return Linkage::average;
  if (s == "single") return Linkage::single;
  if (s == "complete") return Linkage::complete;
  throw Error(ErrorKind::validation, "unknown linkage '" + s + "'");
}

inline const char* to_string(Linkage l) {
  switch (l) {
    case Linkage::average: return "average";
    case Linkage::single: return "single";
    case Linkage::complete: return "complete";
  }
  return "average";
}

/// One agglomeration step: cluster `kept` absorbed cluster `absorbed`.
/// Cluster ids are the index of their founding item; the merged cluster
/// keeps the smaller id.
struct Merge {
  int kept = 0;
  int absorbed = 0;
  double distance = 0.0;
};

struct HacStop {
  double theta = kInfinity;         // merge only while min distance <= theta
  std::size_t target_clusters = 1;  // never go below this many clusters
};

struct HacResult {
  std::vector<std::vector<std::size_t>> clusters;  // item indices, ascending; ordered by cluster id
  std::vector<int> cluster_ids;
  std::vector<Merge> merges;
};

/// Runs agglomerative clustering. `distance` must be square and symmetric;
/// +infinity entries are cannot-link pairs. Ties in the minimum are broken
/// by the smallest (cluster id, cluster id) pair.
inline HacResult agglomerate(const Matrix& distance, const HacStop& stop,
                             Linkage linkage = Linkage::average) {
  const std::size_t n = static_cast<std::size_t>(distance.rows());
  if (distance.rows() != distance.cols()) {
    throw Error(ErrorKind::dimension_mismatch, "agglomerate: distance matrix must be square");
  }

  Matrix d = distance;
  std::vector<std::vector<std::size_t>> members(n);
  std::vector<bool> active(n, true);
  for (std::size_t i = 0; i < n; ++i) members[i] = {i};

  HacResult result;
  std::size_t live = n;
  while (live > stop.target_clusters && live > 1) {
    double best = kInfinity;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!active[j]) continue;
        const double v = d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (v < best) {
          best = v;
          bi = i;
          bj = j;
        }
      }
    }
    if (best == kInfinity || best > stop.theta) break;

    const double ni = static_cast<double>(members[bi].size());
    const double nj = static_cast<double>(members[bj].size());
    for (std::size_t c = 0; c < n; ++c) {
      if (!active[c] || c == bi || c == bj) continue;
      const auto ci = static_cast<Eigen::Index>(c);
      const double di = d(static_cast<Eigen::Index>(bi), ci);
      const double dj = d(static_cast<Eigen::Index>(bj), ci);
      double merged = kInfinity;
      if (di != kInfinity && dj != kInfinity) {
        switch (linkage) {
          case Linkage::average: merged = (ni * di + nj * dj) / (ni + nj); break;
          case Linkage::single: merged = std::min(di, dj); break;
          case Linkage::complete: merged = std::max(di, dj); break;
        }
      }
      d(static_cast<Eigen::Index>(bi), ci) = merged;
      d(ci, static_cast<Eigen::Index>(bi)) = merged;
    }
    members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
    std::sort(members[bi].begin(), members[bi].end());
    members[bj].clear();
    active[bj] = false;
    --live;
    result.merges.push_back({static_cast<int>(bi), static_cast<int>(bj), best});
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (!active[i]) continue;
    result.cluster_ids.push_back(static_cast<int>(i));
    result.clusters.push_back(members[i]);
  }
  return result;
}

}  // namespace adaptrack
