#pragma once

// Training-constraint mining from tracklets. Same-tracklet detections are
// positives, frame-overlapping tracklets are negatives, contextual grouping
// adds same-identity tracklet pairs across shots, and transitive
// propagation closes both relations over the resulting components.

#include "adaptrack/core.hpp"
#include "adaptrack/hac.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace adaptrack {

using IdPair = std::pair<int, int>;       // stored with first < second
using IdTriplet = std::array<int, 3>;     // anchor, positive, negative

inline IdPair make_pair_key(int a, int b) { return a < b ? IdPair{a, b} : IdPair{b, a}; }

struct ConstraintSet {
  std::vector<IdPair> positives;  // detection level, sorted and unique
  std::vector<IdPair> negatives;
  std::vector<IdTriplet> triplets;
  std::set<IdPair> tracklet_pos;
  std::set<IdPair> tracklet_neg;
};

struct ContextConfig {
  bool enabled = true;
  double merge_threshold = 60.0;
  double min_confidence_margin = -1.0;  // negative: 0.2 * merge_threshold

  double margin() const { return min_confidence_margin < 0.0 ? 0.2 * merge_threshold : min_confidence_margin; }

  void validate() const {
    if (!(merge_threshold > 0.0)) throw Error(ErrorKind::validation, "ContextConfig: merge_threshold must be > 0");
  }
};

struct ContextReport {
  bool skipped = false;
  std::string reason;
  std::size_t groups_accepted = 0;
  std::size_t pairs_added = 0;
  std::size_t conflicts = 0;  // pairs found in both relations, resolved to negative
};

struct ContextOutcome {
  ConstraintSet constraints;
  ContextReport report;
};

namespace detail {

inline void sort_unique(std::vector<IdPair>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

inline void add_within(const std::vector<int>& ids, std::vector<IdPair>& out) {
  for (std::size_t a = 0; a < ids.size(); ++a) {
    for (std::size_t b = a + 1; b < ids.size(); ++b) out.push_back(make_pair_key(ids[a], ids[b]));
  }
}

inline void add_across(const std::vector<int>& x, const std::vector<int>& y, std::vector<IdPair>& out) {
  for (int a : x) {
    for (int b : y) out.push_back(make_pair_key(a, b));
  }
}

inline std::unordered_map<int, const Tracklet*> index_tracklets(const std::vector<Tracklet>& tracks) {
  std::unordered_map<int, const Tracklet*> idx;
  for (const auto& t : tracks) idx[t.tracklet_id] = &t;
  return idx;
}

class UnionFind {
 public:
  int find(int x) {
    auto it = parent_.find(x);
    if (it == parent_.end()) {
      parent_[x] = x;
      return x;
    }
    if (it->second == x) return x;
    const int root = find(it->second);
    parent_[x] = root;
    return root;
  }

  void unite(int a, int b) {
    const int ra = find(a);
    const int rb = find(b);
    if (ra == rb) return;
    // smaller id becomes the root so components are named by their minimum
    if (ra < rb) parent_[rb] = ra; else parent_[ra] = rb;
  }

 private:
  std::unordered_map<int, int> parent_;
};

/// Components of tracklet_pos over every tracklet, keyed by the smallest
/// member id. Members ascending.
inline std::map<int, std::vector<int>> positive_components(const ConstraintSet& cs,
                                                           const std::vector<Tracklet>& tracks) {
  UnionFind uf;
  for (const auto& t : tracks) uf.find(t.tracklet_id);
  for (const auto& [a, b] : cs.tracklet_pos) uf.unite(a, b);
  std::map<int, std::vector<int>> comps;
  for (const auto& t : tracks) comps[uf.find(t.tracklet_id)].push_back(t.tracklet_id);
  for (auto& [root, members] : comps) std::sort(members.begin(), members.end());
  return comps;
}

}  // namespace detail

/// Positives from every within-tracklet pair; negatives from every cross pair
/// of tracklets that share at least one frame.
inline ConstraintSet mine_spatiotemporal(const std::vector<Tracklet>& tracks) {
  ConstraintSet cs;
  for (const auto& t : tracks) detail::add_within(t.detections, cs.positives);
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    for (std::size_t j = i + 1; j < tracks.size(); ++j) {
      if (!tracklets_overlap(tracks[i], tracks[j])) continue;
      cs.tracklet_neg.insert(make_pair_key(tracks[i].tracklet_id, tracks[j].tracklet_id));
      detail::add_across(tracks[i].detections, tracks[j].detections, cs.negatives);
    }
  }
  detail::sort_unique(cs.positives);
  detail::sort_unique(cs.negatives);
  return cs;
}

/// Mean of [feature | context_feature] over the tracklet's detections.
inline Vector context_descriptor(const Tracklet& t, const Sequence& seq) {
  const auto f = static_cast<Eigen::Index>(seq.feature_dim());
  const auto c = static_cast<Eigen::Index>(seq.context_dim());
  Vector acc = Vector::Zero(f + c);
  for (int id : t.detections) {
    const Detection& d = seq.detection(id);
    acc.head(f) += d.feature;
    acc.tail(c) += d.context_feature;
  }
  return acc / static_cast<double>(t.size());
}

/// Groups tracklets by clustering their appearance+context descriptors and
/// marks every pair inside a confident group as the same identity. A group
/// is confident when its largest internal descriptor distance stays below
/// merge_threshold - margin. Pairs already known to differ are never
/// grouped.
inline ContextOutcome mine_contextual(const std::vector<Tracklet>& tracks, const Sequence& seq,
                                      const ContextConfig& cfg, ConstraintSet cs) {
  cfg.validate();
  ContextOutcome out;
  if (!cfg.enabled) {
    out.report.skipped = true;
    out.report.reason = "contextual mining disabled";
    out.constraints = std::move(cs);
    return out;
  }
  for (const auto& t : tracks) {
    for (int id : t.detections) {
      if (!seq.detection(id).has_context()) {
        out.report.skipped = true;
        out.report.reason = "missing context feature for detection " + std::to_string(id);
        out.constraints = std::move(cs);
        return out;
      }
    }
  }

  const std::size_t n = tracks.size();
  std::vector<Vector> desc;
  desc.reserve(n);
  for (const auto& t : tracks) desc.push_back(context_descriptor(t, seq));

  Matrix d = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool blocked = tracklets_overlap(tracks[i], tracks[j]) ||
                           cs.tracklet_neg.count(make_pair_key(tracks[i].tracklet_id, tracks[j].tracklet_id));
      const double v = blocked ? kInfinity : embed_distance(desc[i], desc[j]);
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      d(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }

  const HacResult hac = agglomerate(d, HacStop{cfg.merge_threshold, 1}, Linkage::average);
  const double accept_below = cfg.merge_threshold - cfg.margin();
  for (const auto& group : hac.clusters) {
    if (group.size() < 2) continue;
    double widest = 0.0;
    for (std::size_t a = 0; a < group.size(); ++a) {
      for (std::size_t b = a + 1; b < group.size(); ++b) {
        widest = std::max(widest, d(static_cast<Eigen::Index>(group[a]), static_cast<Eigen::Index>(group[b])));
      }
    }
    if (!(widest < accept_below)) continue;
    ++out.report.groups_accepted;
    for (std::size_t a = 0; a < group.size(); ++a) {
      for (std::size_t b = a + 1; b < group.size(); ++b) {
        const IdPair key = make_pair_key(tracks[group[a]].tracklet_id, tracks[group[b]].tracklet_id);
        if (cs.tracklet_neg.count(key)) {
          ++out.report.conflicts;
          continue;
        }
        if (cs.tracklet_pos.insert(key).second) ++out.report.pairs_added;
      }
    }
  }
  out.constraints = std::move(cs);
  return out;
}

/// Closes the tracklet relations: positives become all pairs within a
/// connected component of tracklet_pos, and a negative between two
/// components extends to every member pair. Detection-level pairs are
/// regenerated from the closed relations. Throws on a negative inside a
/// positive component.
inline ConstraintSet propagate_transitive(const ConstraintSet& cs, const std::vector<Tracklet>& tracks) {
  const auto comps = detail::positive_components(cs, tracks);
  const auto by_id = detail::index_tracklets(tracks);
  std::unordered_map<int, int> root_of;
  for (const auto& [root, members] : comps) {
    for (int m : members) root_of[m] = root;
  }
  auto root = [&](int tracklet_id) {
    auto it = root_of.find(tracklet_id);
    if (it == root_of.end()) {
      throw Error(ErrorKind::precondition, "constraint refers to unknown tracklet " + std::to_string(tracklet_id));
    }
    return it->second;
  };

  std::vector<IdPair> contradictions;
  std::set<IdPair> comp_neg;
  for (const auto& [a, b] : cs.tracklet_neg) {
    const int ra = root(a);
    const int rb = root(b);
    if (ra == rb) {
      contradictions.push_back({a, b});
    } else {
      comp_neg.insert(make_pair_key(ra, rb));
    }
  }
  if (!contradictions.empty()) {
    std::ostringstream os;
    os << "propagate_transitive: contradictory tracklet pairs";
    for (const auto& [a, b] : contradictions) os << " (" << a << "," << b << ")";
    throw Error(ErrorKind::contradiction, os.str());
  }

  ConstraintSet out;
  out.triplets = cs.triplets;
  out.positives = cs.positives;
  out.negatives = cs.negatives;

  for (const auto& [r, members] : comps) {
    std::vector<int> dets;
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = a + 1; b < members.size(); ++b) out.tracklet_pos.insert({members[a], members[b]});
      const auto& ds = by_id.at(members[a])->detections;
      dets.insert(dets.end(), ds.begin(), ds.end());
    }
    detail::add_within(dets, out.positives);
  }
  for (const auto& [ra, rb] : comp_neg) {
    for (int a : comps.at(ra)) {
      for (int b : comps.at(rb)) {
        out.tracklet_neg.insert(make_pair_key(a, b));
        detail::add_across(by_id.at(a)->detections, by_id.at(b)->detections, out.negatives);
      }
    }
  }
  detail::sort_unique(out.positives);
  detail::sort_unique(out.negatives);

  std::vector<IdPair> both;
  std::set_intersection(out.positives.begin(), out.positives.end(), out.negatives.begin(), out.negatives.end(),
                        std::back_inserter(both));
  if (!both.empty()) {
    std::ostringstream os;
    os << "propagate_transitive: " << both.size() << " detection pairs are both positive and negative, first ("
       << both.front().first << "," << both.front().second << ")";
    throw Error(ErrorKind::contradiction, os.str());
  }
  return out;
}

/// Triplets (anchor, positive, negative) for every pair of positive
/// components joined by a negative constraint. Anchor and positive are two
/// distinct detections of one component (a single tracklet when no
/// contextual positives exist); the negative comes from the other. Both
/// orientations are emitted. When a component pair yields more than
/// `max_per_negpair` triplets (0 = unlimited), a uniform sample without
/// replacement of that size is drawn from a generator seeded with `seed`.
inline std::vector<IdTriplet> generate_triplets(const ConstraintSet& cs, const std::vector<Tracklet>& tracks,
                                                std::size_t max_per_negpair, std::uint64_t seed) {
  const auto comps = detail::positive_components(cs, tracks);
  const auto by_id = detail::index_tracklets(tracks);
  std::unordered_map<int, int> root_of;
  std::map<int, std::vector<int>> dets_of;
  for (const auto& [r, members] : comps) {
    for (int m : members) {
      root_of[m] = r;
      const auto& ds = by_id.at(m)->detections;
      dets_of[r].insert(dets_of[r].end(), ds.begin(), ds.end());
    }
  }
  std::set<IdPair> comp_pairs;
  for (const auto& [a, b] : cs.tracklet_neg) {
    auto ia = root_of.find(a);
    auto ib = root_of.find(b);
    if (ia == root_of.end() || ib == root_of.end() || ia->second == ib->second) continue;
    comp_pairs.insert(make_pair_key(ia->second, ib->second));
  }

  std::mt19937_64 rng(seed);
  std::vector<IdTriplet> out;
  for (const auto& [rp, rq] : comp_pairs) {
    const auto& p = dets_of.at(rp);
    const auto& q = dets_of.at(rq);
    const std::uint64_t np = p.size();
    const std::uint64_t nq = q.size();
    const std::uint64_t from_p = np * (np > 0 ? np - 1 : 0) * nq;
    const std::uint64_t from_q = nq * (nq > 0 ? nq - 1 : 0) * np;
    const std::uint64_t total = from_p + from_q;

    auto decode = [&](std::uint64_t idx) -> IdTriplet {
      const std::vector<int>* own = &p;
      const std::vector<int>* other = &q;
      std::uint64_t n_own = np, n_other = nq;
      if (idx >= from_p) {
        idx -= from_p;
        std::swap(own, other);
        std::swap(n_own, n_other);
      }
      const std::uint64_t per_anchor = (n_own - 1) * n_other;
      const std::uint64_t k = idx / per_anchor;
      const std::uint64_t rem = idx % per_anchor;
      std::uint64_t l = rem / n_other;
      if (l >= k) ++l;
      const std::uint64_t m = rem % n_other;
      return {(*own)[k], (*own)[l], (*other)[m]};
    };

    if (max_per_negpair == 0 || total <= max_per_negpair) {
      for (std::uint64_t i = 0; i < total; ++i) out.push_back(decode(i));
      continue;
    }
    // Floyd's sampling of max_per_negpair distinct indices from [0, total)
    std::unordered_set<std::uint64_t> chosen;
    for (std::uint64_t j = total - max_per_negpair; j < total; ++j) {
      std::uniform_int_distribution<std::uint64_t> pick(0, j);
      const std::uint64_t t = pick(rng);
      if (!chosen.insert(t).second) chosen.insert(j);
    }
    std::vector<std::uint64_t> sorted(chosen.begin(), chosen.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::uint64_t i : sorted) out.push_back(decode(i));
  }
  return out;
}

}  // namespace adaptrack
