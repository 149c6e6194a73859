#pragma once

// Two-step association: tracklets are chained inside each shot with a
// minimum-cost assignment, then shot-level tracklets are clustered across
// shots into identity trajectories.

#include "adaptrack/core.hpp"
#include "adaptrack/hac.hpp"
#include "adaptrack/hungarian.hpp"
#include "adaptrack/parallel.hpp"

#include <cmath>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace adaptrack {

/// Embedding of every detection, keyed by detection id.
using EmbeddingTable = std::unordered_map<int, Vector>;

struct LinkerConfig {
  double theta = 5.0;
  std::size_t min_cluster_tracklets = 4;
  std::size_t min_cluster_frames = 50;
  Linkage linkage = Linkage::average;

  // within-shot association
  double within_shot_gate = 2.0;
  int within_shot_max_gap = 30;
  double w_appearance = 0.6;
  double w_kinematic = 0.2;
  double w_temporal = 0.2;

  void validate() const {
    auto fail = [](const std::string& what) {
      throw Error(ErrorKind::validation, "LinkerConfig: " + what);
    };
    if (!(theta > 0.0)) fail("theta must be > 0");
    if (min_cluster_tracklets == 0 || min_cluster_frames == 0) fail("cluster minimums must be positive");
    if (!(within_shot_gate > 0.0)) fail("within_shot_gate must be > 0");
    if (within_shot_max_gap < 1) fail("within_shot_max_gap must be >= 1");
    if (w_appearance < 0.0 || w_kinematic < 0.0 || w_temporal < 0.0) fail("weights must be non-negative");
  }
};

/// A shot-level tracklet: the chain of original tracklets merged inside one
/// shot. `track` holds the concatenated detections; `members` the original
/// tracklet ids in temporal order.
struct LinkedTracklet {
  Tracklet track;
  std::vector<int> members;
};

namespace detail {

inline const Vector& lookup(const EmbeddingTable& table, int detection_id) {
  auto it = table.find(detection_id);
  if (it == table.end()) {
    throw Error(ErrorKind::precondition, "missing embedding for detection " + std::to_string(detection_id));
  }
  return it->second;
}

}  // namespace detail

/// Mean pairwise squared distance between the member embeddings of two
/// tracklets, or infinity when they share a frame.
inline double tracklet_mean_distance(const Tracklet& ti, const Tracklet& tj, const EmbeddingTable& emb) {
  std::vector<const Vector*> a, b;
  a.reserve(ti.size());
  b.reserve(tj.size());
  for (int id : ti.detections) a.push_back(&detail::lookup(emb, id));
  for (int id : tj.detections) b.push_back(&detail::lookup(emb, id));
  if (tracklets_overlap(ti, tj)) return kInfinity;
  if (a.empty() || b.empty()) {
    throw Error(ErrorKind::precondition, "tracklet_mean_distance: empty tracklet");
  }
  double sum = 0.0;
  for (const Vector* x : a) {
    for (const Vector* y : b) sum += embed_distance(*x, *y);
  }
  return sum / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

/// Symmetric matrix of tracklet_mean_distance over all pairs (diagonal 0).
inline Matrix tracklet_distance_matrix(const std::vector<const Tracklet*>& tracks, const EmbeddingTable& emb) {
  const std::size_t n = tracks.size();
  Matrix d = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          tracklet_mean_distance(*tracks[i], *tracks[j], emb);
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
    }
  }
  return d;
}

inline Matrix tracklet_distance_matrix(const std::vector<Tracklet>& tracks, const EmbeddingTable& emb) {
  std::vector<const Tracklet*> ptrs;
  for (const auto& t : tracks) ptrs.push_back(&t);
  return tracklet_distance_matrix(ptrs, emb);
}

/// Cost of appending tracklet `next` after `prev` in the same shot, or
/// infinity when the pair is not temporally ordered, too far apart, or
/// above the gate.
inline double within_shot_link_cost(const Tracklet& prev, const Tracklet& next, const Sequence& seq,
                                    const EmbeddingTable& emb, const LinkerConfig& cfg) {
  const int gap = next.first_frame() - prev.last_frame();
  if (gap <= 0 || gap > cfg.within_shot_max_gap) return kInfinity;

  const double appearance = tracklet_mean_distance(prev, next, emb);

  // constant-velocity extrapolation from the tail of `prev`
  const std::size_t window = std::min<std::size_t>(prev.size(), 5);
  const Detection& last = seq.detection(prev.detections.back());
  const Detection& anchor = seq.detection(prev.detections[prev.size() - window]);
  double vx = 0.0, vy = 0.0;
  if (last.frame > anchor.frame) {
    const double dt = static_cast<double>(last.frame - anchor.frame);
    vx = (last.bbox.cx() - anchor.bbox.cx()) / dt;
    vy = (last.bbox.cy() - anchor.bbox.cy()) / dt;
  }
  const Detection& first = seq.detection(next.detections.front());
  const double px = last.bbox.cx() + vx * gap;
  const double py = last.bbox.cy() + vy * gap;
  const double kinematic = std::hypot(px - first.bbox.cx(), py - first.bbox.cy()) / std::sqrt(last.bbox.area());

  const double temporal = static_cast<double>(gap - 1) / static_cast<double>(cfg.within_shot_max_gap);

  const double cost = cfg.w_appearance * appearance + cfg.w_kinematic * kinematic + cfg.w_temporal * temporal;
  return cost > cfg.within_shot_gate ? kInfinity : cost;
}

/// Chains the tracklets of one shot through a minimum-cost successor
/// assignment. Every tracklet may also take a "no successor" option priced
/// at the gate, so a link is made only when it is cheaper than leaving the
/// tracklet open-ended.
inline std::vector<LinkedTracklet> link_within_shot(const std::vector<Tracklet>& tracks, const Sequence& seq,
                                                    const EmbeddingTable& emb, const LinkerConfig& cfg) {
  const std::size_t n = tracks.size();
  for (std::size_t i = 1; i < n; ++i) {
    if (tracks[i].shot_id != tracks[0].shot_id) {
      throw Error(ErrorKind::precondition, "link_within_shot: tracklets from different shots");
    }
  }

  std::vector<int> next(n, -1), prev(n, -1);
  if (n > 1) {
    const auto ni = static_cast<Eigen::Index>(n);
    Matrix cost = Matrix::Constant(ni, 2 * ni, kInfinity);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            within_shot_link_cost(tracks[i], tracks[j], seq, emb, cfg);
      }
      cost(static_cast<Eigen::Index>(i), ni + static_cast<Eigen::Index>(i)) = cfg.within_shot_gate;
    }
    const Assignment a = hungarian(cost);
    for (std::size_t i = 0; i < n; ++i) {
      const int j = a.row_to_col[i];
      if (j >= 0 && static_cast<std::size_t>(j) < n) {
        next[i] = j;
        prev[static_cast<std::size_t>(j)] = static_cast<int>(i);
      }
    }
  }

  std::vector<LinkedTracklet> out;
  for (std::size_t head = 0; head < n; ++head) {
    if (prev[head] >= 0) continue;
    LinkedTracklet lt;
    lt.track.shot_id = tracks[head].shot_id;
    for (int cur = static_cast<int>(head); cur >= 0; cur = next[static_cast<std::size_t>(cur)]) {
      const Tracklet& t = tracks[static_cast<std::size_t>(cur)];
      lt.members.push_back(t.tracklet_id);
      lt.track.detections.insert(lt.track.detections.end(), t.detections.begin(), t.detections.end());
      lt.track.frames.insert(lt.track.frames.end(), t.frames.begin(), t.frames.end());
    }
    lt.track.tracklet_id = *std::min_element(lt.members.begin(), lt.members.end());
    out.push_back(std::move(lt));
  }
  std::sort(out.begin(), out.end(), [](const LinkedTracklet& a, const LinkedTracklet& b) {
    if (a.track.first_frame() != b.track.first_frame()) return a.track.first_frame() < b.track.first_frame();
    return a.track.tracklet_id < b.track.tracklet_id;
  });
  return out;
}

/// Applies link_within_shot to every shot and concatenates the results.
inline std::vector<LinkedTracklet> link_all_shots(const std::vector<Tracklet>& tracks, const Sequence& seq,
                                                  const EmbeddingTable& emb, const LinkerConfig& cfg) {
  std::map<int, std::vector<Tracklet>> per_shot;
  for (const auto& t : tracks) per_shot[seq.shot_index_of_frame(t.first_frame())].push_back(t);
  std::vector<LinkedTracklet> out;
  for (const auto& [shot, members] : per_shot) {
    auto linked = link_within_shot(members, seq, emb, cfg);
    out.insert(out.end(), std::make_move_iterator(linked.begin()), std::make_move_iterator(linked.end()));
  }
  return out;
}

/// Result of cross-shot clustering before and after the small-cluster
/// filter. `clusters` index into the input tracklet list.
struct ClusterOutcome {
  HacResult hac;
  std::vector<std::vector<std::size_t>> kept;  // survivors, ordered by identity label
};

/// Clusters shot-level tracklets, drops clusters that have fewer than
/// min_cluster_tracklets tracklets and fewer than min_cluster_frames
/// frames, and labels survivors 1..K in order of first frame.
inline ClusterOutcome cluster_across_shots(const std::vector<LinkedTracklet>& tracks, const EmbeddingTable& emb,
                                           const LinkerConfig& cfg) {
  cfg.validate();
  std::vector<const Tracklet*> ptrs;
  for (const auto& t : tracks) ptrs.push_back(&t.track);
  ClusterOutcome out;
  out.hac = agglomerate(tracklet_distance_matrix(ptrs, emb), HacStop{cfg.theta, 1}, cfg.linkage);

  struct Survivor {
    int first_frame;
    int cluster_id;
    std::vector<std::size_t> items;
  };
  std::vector<Survivor> survivors;
  for (std::size_t c = 0; c < out.hac.clusters.size(); ++c) {
    const auto& items = out.hac.clusters[c];
    const std::size_t member_tracklets = items.size();
    std::size_t frames = 0;
    int first = std::numeric_limits<int>::max();
    for (std::size_t i : items) {
      frames += tracks[i].track.size();
      first = std::min(first, tracks[i].track.first_frame());
    }
    if (member_tracklets < cfg.min_cluster_tracklets && frames < cfg.min_cluster_frames) continue;
    survivors.push_back({first, out.hac.cluster_ids[c], items});
  }
  std::sort(survivors.begin(), survivors.end(), [](const Survivor& a, const Survivor& b) {
    if (a.first_frame != b.first_frame) return a.first_frame < b.first_frame;
    return a.cluster_id < b.cluster_id;
  });
  for (auto& s : survivors) out.kept.push_back(std::move(s.items));
  return out;
}

/// Cross-shot linking into identity-labelled trajectories.
inline std::vector<Trajectory> link_across_shots(const std::vector<LinkedTracklet>& tracks, const EmbeddingTable& emb,
                                                 const LinkerConfig& cfg) {
  const ClusterOutcome outcome = cluster_across_shots(tracks, emb, cfg);
  std::vector<Trajectory> out;
  for (std::size_t c = 0; c < outcome.kept.size(); ++c) {
    Trajectory traj;
    traj.identity = static_cast<int>(c) + 1;
    for (std::size_t i : outcome.kept[c]) {
      traj.tracklet_ids.insert(traj.tracklet_ids.end(), tracks[i].members.begin(), tracks[i].members.end());
    }
    std::sort(traj.tracklet_ids.begin(), traj.tracklet_ids.end());
    out.push_back(std::move(traj));
  }
  return out;
}

struct KClustering {
  std::vector<std::vector<std::size_t>> clusters;  // indices into the input tracklets
  std::size_t requested = 0;
  std::size_t achieved = 0;
  bool reached() const { return achieved == requested; }
};

/// Agglomerates until exactly k clusters remain, ignoring theta. Stops early
/// (achieved > k) when only cannot-link pairs are left.
inline KClustering cluster_to_k(const Matrix& tracklet_distances, std::size_t k, Linkage linkage = Linkage::average) {
  const auto n = static_cast<std::size_t>(tracklet_distances.rows());
  if (k < 1 || k > n) {
    throw Error(ErrorKind::precondition, "cluster_to_k: require 1 <= k <= number of tracklets");
  }
  HacResult r = agglomerate(tracklet_distances, HacStop{kInfinity, k}, linkage);
  KClustering out;
  out.requested = k;
  out.achieved = r.clusters.size();
  out.clusters = std::move(r.clusters);
  return out;
}

inline KClustering cluster_to_k(const std::vector<Tracklet>& tracks, const EmbeddingTable& emb, std::size_t k,
                                Linkage linkage = Linkage::average) {
  return cluster_to_k(tracklet_distance_matrix(tracks, emb), k, linkage);
}

}  // namespace adaptrack
