#pragma once

// Evaluation: weighted clustering purity, CLEAR-MOT counts and the
// identity-level IDP / IDR / IDF1 family.

#include "adaptrack/core.hpp"
#include "adaptrack/hungarian.hpp"

#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace adaptrack {

/// Weighted purity of a clustering. Each inner vector holds the
/// ground-truth identity of every element of one cluster.
inline double weighted_purity(const std::vector<std::vector<int>>& clusters) {
  std::size_t total = 0;
  std::size_t dominant_sum = 0;
  for (const auto& c : clusters) {
    std::unordered_map<int, std::size_t> counts;
    std::size_t best = 0;
    for (int label : c) best = std::max(best, ++counts[label]);
    total += c.size();
    dominant_sum += best;  // m_c * p_c
  }
  if (total == 0) throw Error(ErrorKind::precondition, "weighted_purity: empty clustering");
  return static_cast<double>(dominant_sum) / static_cast<double>(total);
}

struct LabeledBox {
  int id = 0;
  BBox box;
};

/// Boxes per frame over an inclusive frame range. Frames with no boxes may
/// be absent from the map.
struct FrameBoxes {
  int first_frame = 0;
  int last_frame = -1;
  std::map<int, std::vector<LabeledBox>> frames;

  std::size_t frame_count() const {
    return last_frame >= first_frame ? static_cast<std::size_t>(last_frame - first_frame + 1) : 0;
  }
  std::size_t box_count() const {
    std::size_t n = 0;
    for (const auto& [f, boxes] : frames) n += boxes.size();
    return n;
  }
  const std::vector<LabeledBox>& at(int frame) const {
    static const std::vector<LabeledBox> kEmpty;
    auto it = frames.find(frame);
    return it == frames.end() ? kEmpty : it->second;
  }
};

struct IdentityReport {
  double idp = 0.0;
  double idr = 0.0;
  double idf1 = 0.0;
  std::size_t idtp = 0;
  std::map<int, int> gt_to_hyp;  // optimal identity correspondence
};

struct MotReport {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
  double faf = 0.0;
  std::size_t ids = 0;
  std::size_t frag = 0;
  double mota = 0.0;
  double motp = 0.0;
  double idp = 0.0;
  double idr = 0.0;
  double idf1 = 0.0;

  std::size_t gt = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t frames = 0;
};

namespace detail {

inline void check_ranges(const FrameBoxes& hyp, const FrameBoxes& gt) {
  if (hyp.first_frame != gt.first_frame || hyp.last_frame != gt.last_frame) {
    throw Error(ErrorKind::validation, "frame ranges of hypotheses and ground truth differ");
  }
  for (const FrameBoxes* fb : {&hyp, &gt}) {
    for (const auto& [f, boxes] : fb->frames) {
      if (f < fb->first_frame || f > fb->last_frame) {
        throw Error(ErrorKind::validation, "box outside the declared frame range at frame " + std::to_string(f));
      }
      std::set<int> seen;
      for (const auto& b : boxes) {
        if (!seen.insert(b.id).second) {
          throw Error(ErrorKind::validation,
                      "identity " + std::to_string(b.id) + " appears twice in frame " + std::to_string(f));
        }
      }
    }
  }
}

}  // namespace detail

/// Global trajectory-level identity assignment: the GT/hypothesis identity
/// correspondence maximizing the number of co-located detections (IoU at or
/// above the threshold), then IDP = IDTP / hyp boxes, IDR = IDTP / GT boxes.
inline IdentityReport identity_metrics(const FrameBoxes& hyp, const FrameBoxes& gt, double iou_threshold = 0.5) {
  detail::check_ranges(hyp, gt);
  std::map<int, std::size_t> gt_index, hyp_index;
  for (const auto& [f, boxes] : gt.frames) {
    for (const auto& b : boxes) gt_index.emplace(b.id, gt_index.size());
  }
  for (const auto& [f, boxes] : hyp.frames) {
    for (const auto& b : boxes) hyp_index.emplace(b.id, hyp_index.size());
  }

  IdentityReport rep;
  const std::size_t n_gt_boxes = gt.box_count();
  const std::size_t n_hyp_boxes = hyp.box_count();
  if (gt_index.empty() || hyp_index.empty()) return rep;

  Matrix overlap = Matrix::Zero(static_cast<Eigen::Index>(gt_index.size()), static_cast<Eigen::Index>(hyp_index.size()));
  for (const auto& [f, gboxes] : gt.frames) {
    const auto& hboxes = hyp.at(f);
    for (const auto& g : gboxes) {
      for (const auto& h : hboxes) {
        if (iou(g.box, h.box) >= iou_threshold) {
          overlap(static_cast<Eigen::Index>(gt_index[g.id]), static_cast<Eigen::Index>(hyp_index[h.id])) += 1.0;
        }
      }
    }
  }
  const Assignment a = hungarian(-overlap);
  std::vector<int> hyp_ids(hyp_index.size());
  for (const auto& [id, i] : hyp_index) hyp_ids[i] = id;
  for (const auto& [gid, gi] : gt_index) {
    const int c = a.row_to_col[gi];
    if (c < 0) continue;
    const double v = overlap(static_cast<Eigen::Index>(gi), c);
    if (v > 0.0) {
      rep.idtp += static_cast<std::size_t>(v);
      rep.gt_to_hyp[gid] = hyp_ids[static_cast<std::size_t>(c)];
    }
  }
  rep.idp = n_hyp_boxes ? static_cast<double>(rep.idtp) / static_cast<double>(n_hyp_boxes) : 0.0;
  rep.idr = n_gt_boxes ? static_cast<double>(rep.idtp) / static_cast<double>(n_gt_boxes) : 0.0;
  rep.idf1 = (rep.idp + rep.idr) > 0.0 ? 2.0 * rep.idp * rep.idr / (rep.idp + rep.idr) : 0.0;
  return rep;
}

/// CLEAR-MOT evaluation. Per frame, correspondences from earlier frames are
/// kept while their IoU stays at or above the threshold; the rest are
/// matched by a minimum-cost assignment on 1 - IoU. An identity switch is
/// counted when a GT object is matched to a different hypothesis than at
/// its last match. A fragmentation is counted each time a GT object that
/// was matched at its previous appearance goes unmatched. Identity metrics
/// are filled in from identity_metrics().
inline MotReport clear_mot(const FrameBoxes& hyp, const FrameBoxes& gt, double iou_threshold = 0.5) {
  detail::check_ranges(hyp, gt);
  MotReport rep;
  rep.frames = gt.frame_count();

  std::unordered_map<int, int> last_hyp;     // gt id -> hyp id at last match
  std::unordered_map<int, bool> was_tracked;  // gt id -> matched at previous appearance
  double iou_sum = 0.0;

  for (int f = gt.first_frame; f <= gt.last_frame; ++f) {
    const auto& gboxes = gt.at(f);
    const auto& hboxes = hyp.at(f);
    rep.gt += gboxes.size();

    std::vector<int> g_match(gboxes.size(), -1);
    std::vector<bool> h_taken(hboxes.size(), false);

    for (std::size_t gi = 0; gi < gboxes.size(); ++gi) {
      auto it = last_hyp.find(gboxes[gi].id);
      if (it == last_hyp.end()) continue;
      for (std::size_t hi = 0; hi < hboxes.size(); ++hi) {
        if (!h_taken[hi] && hboxes[hi].id == it->second && iou(gboxes[gi].box, hboxes[hi].box) >= iou_threshold) {
          g_match[gi] = static_cast<int>(hi);
          h_taken[hi] = true;
          break;
        }
      }
    }

    std::vector<std::size_t> free_g, free_h;
    for (std::size_t gi = 0; gi < gboxes.size(); ++gi) {
      if (g_match[gi] < 0) free_g.push_back(gi);
    }
    for (std::size_t hi = 0; hi < hboxes.size(); ++hi) {
      if (!h_taken[hi]) free_h.push_back(hi);
    }
    if (!free_g.empty() && !free_h.empty()) {
      Matrix cost(static_cast<Eigen::Index>(free_g.size()), static_cast<Eigen::Index>(free_h.size()));
      for (std::size_t r = 0; r < free_g.size(); ++r) {
        for (std::size_t c = 0; c < free_h.size(); ++c) {
          const double v = iou(gboxes[free_g[r]].box, hboxes[free_h[c]].box);
          cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v >= iou_threshold ? 1.0 - v : kInfinity;
        }
      }
      const Assignment a = hungarian(cost);
      for (std::size_t r = 0; r < free_g.size(); ++r) {
        if (a.row_to_col[r] >= 0) g_match[free_g[r]] = static_cast<int>(free_h[static_cast<std::size_t>(a.row_to_col[r])]);
      }
    }

    for (std::size_t gi = 0; gi < gboxes.size(); ++gi) {
      const int gid = gboxes[gi].id;
      const int hi = g_match[gi];
      if (hi >= 0) {
        ++rep.tp;
        iou_sum += iou(gboxes[gi].box, hboxes[static_cast<std::size_t>(hi)].box);
        const int hid = hboxes[static_cast<std::size_t>(hi)].id;
        auto it = last_hyp.find(gid);
        if (it != last_hyp.end() && it->second != hid) ++rep.ids;
        last_hyp[gid] = hid;
        was_tracked[gid] = true;
      } else {
        ++rep.fn;
        auto it = was_tracked.find(gid);
        if (it != was_tracked.end() && it->second) ++rep.frag;
        was_tracked[gid] = false;
      }
    }
    rep.fp += hboxes.size() - static_cast<std::size_t>(std::count_if(g_match.begin(), g_match.end(), [](int m) { return m >= 0; }));
  }

  const std::size_t n_hyp = hyp.box_count();
  rep.recall = rep.gt ? static_cast<double>(rep.tp) / static_cast<double>(rep.gt) : 0.0;
  rep.precision = n_hyp ? static_cast<double>(rep.tp) / static_cast<double>(n_hyp) : 0.0;
  rep.f1 = (rep.recall + rep.precision) > 0.0 ? 2.0 * rep.recall * rep.precision / (rep.recall + rep.precision) : 0.0;
  rep.faf = rep.frames ? static_cast<double>(rep.fp) / static_cast<double>(rep.frames) : 0.0;
  rep.mota = rep.gt ? 1.0 - static_cast<double>(rep.fn + rep.fp + rep.ids) / static_cast<double>(rep.gt) : 0.0;
  rep.motp = rep.tp ? iou_sum / static_cast<double>(rep.tp) : 0.0;

  const IdentityReport id = identity_metrics(hyp, gt, iou_threshold);
  rep.idp = id.idp;
  rep.idr = id.idr;
  rep.idf1 = id.idf1;
  return rep;
}

}  // namespace adaptrack
