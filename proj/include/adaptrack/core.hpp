#pragma once

// Shared domain types for the tracking pipeline: detections, shots,
// tracklets, trajectories, the embedding-space distance and the validated
// sequence index that every later stage consumes.

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace adaptrack {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class ErrorKind {
  validation,
  dimension_mismatch,
  precondition,
  contradiction,
  numeric,
  io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::dimension_mismatch: return "dimension mismatch";
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::contradiction: return "contradiction";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }
};

inline double iou(const BBox& a, const BBox& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

struct Detection {
  int id = 0;
  int frame = 0;
  BBox bbox;
  double score = 1.0;
  Vector feature;
  Vector context_feature;  // empty when the record carries no context

  bool has_context() const { return context_feature.size() > 0; }
};

struct Shot {
  int shot_id = 0;
  int start_frame = 0;
  int end_frame = 0;  // inclusive

  bool contains(int frame) const { return frame >= start_frame && frame <= end_frame; }
  int length() const { return end_frame - start_frame + 1; }
};

/// A temporally ordered run of detections inside one shot. `frames` runs
/// parallel to `detections` and is strictly increasing.
struct Tracklet {
  int tracklet_id = 0;
  int shot_id = 0;
  std::vector<int> detections;
  std::vector<int> frames;

  std::size_t size() const { return detections.size(); }
  int first_frame() const { return frames.front(); }
  int last_frame() const { return frames.back(); }
};

struct Trajectory {
  int identity = 0;
  std::vector<int> tracklet_ids;
};

/// True when the two sorted frame lists share at least one frame.
inline bool frames_overlap(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.empty() || b.empty() || a.back() < b.front() || b.back() < a.front()) return false;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia == *ib) return true;
    if (*ia < *ib) ++ia; else ++ib;
  }
  return false;
}

inline bool tracklets_overlap(const Tracklet& a, const Tracklet& b) {
  return frames_overlap(a.frames, b.frames);
}

/// Squared Euclidean distance between two embeddings.
inline double embed_distance(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    std::ostringstream os;
    os << "embed_distance: dimension mismatch (" << a.size() << " vs " << b.size() << ")";
    throw Error(ErrorKind::dimension_mismatch, os.str());
  }
  return (a - b).squaredNorm();
}

/// Immutable, validated view of one input sequence with per-shot and
/// per-frame lookup. Build it through validate_sequence().
class Sequence {
 public:
  Sequence() = default;

  const std::vector<Detection>& detections() const { return detections_; }
  const std::vector<Shot>& shots() const { return shots_; }

  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t context_dim() const { return context_dim_; }

  bool contains(int detection_id) const { return index_.count(detection_id) != 0; }

  const Detection& detection(int detection_id) const {
    auto it = index_.find(detection_id);
    if (it == index_.end()) {
      throw Error(ErrorKind::validation, "unknown detection id " + std::to_string(detection_id));
    }
    return detections_[it->second];
  }

  std::size_t index_of(int detection_id) const {
    auto it = index_.find(detection_id);
    if (it == index_.end()) {
      throw Error(ErrorKind::validation, "unknown detection id " + std::to_string(detection_id));
    }
    return it->second;
  }

  /// Position of the shot owning `frame` in shots(), or -1.
  int shot_index_of_frame(int frame) const {
    auto it = std::upper_bound(shots_.begin(), shots_.end(), frame,
                               [](int f, const Shot& s) { return f < s.start_frame; });
    if (it == shots_.begin()) return -1;
    --it;
    return it->contains(frame) ? static_cast<int>(it - shots_.begin()) : -1;
  }

  /// Frame -> detection indices (sorted by detection id) for one shot.
  const std::map<int, std::vector<std::size_t>>& frames_of_shot(std::size_t shot_index) const {
    return by_shot_frame_.at(shot_index);
  }

  friend Sequence validate_sequence(std::vector<Detection>, std::vector<Shot>);

 private:
  std::vector<Detection> detections_;
  std::vector<Shot> shots_;
  std::unordered_map<int, std::size_t> index_;
  std::vector<std::map<int, std::vector<std::size_t>>> by_shot_frame_;
  std::size_t feature_dim_ = 0;
  std::size_t context_dim_ = 0;
};

namespace detail {

inline std::string describe(const Detection& d) {
  std::ostringstream os;
  os << "detection id=" << d.id << " frame=" << d.frame;
  return os.str();
}

}  // namespace detail

/// Checks every input invariant and builds the lookup structure. Shots are
/// sorted by start frame; detections keep their input order.
inline Sequence validate_sequence(std::vector<Detection> detections, std::vector<Shot> shots) {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::validation, what); };

  std::sort(shots.begin(), shots.end(),
            [](const Shot& a, const Shot& b) { return a.start_frame < b.start_frame; });
  for (std::size_t i = 0; i < shots.size(); ++i) {
    const Shot& s = shots[i];
    if (s.end_frame < s.start_frame) {
      fail("empty shot: shot_id=" + std::to_string(s.shot_id));
    }
    if (i > 0 && s.start_frame <= shots[i - 1].end_frame) {
      fail("overlapping shots: shot_id=" + std::to_string(shots[i - 1].shot_id) + " and shot_id=" +
           std::to_string(s.shot_id));
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (shots[j].shot_id == s.shot_id) fail("duplicate shot id " + std::to_string(s.shot_id));
    }
  }

  Sequence seq;
  seq.by_shot_frame_.resize(shots.size());
  seq.shots_ = std::move(shots);

  bool have_dim = false;
  bool have_ctx = false;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const Detection& d = detections[i];
    if (!seq.index_.emplace(d.id, i).second) {
      fail("duplicate id: " + detail::describe(d));
    }
    if (!(d.bbox.w > 0.0) || !(d.bbox.h > 0.0)) {
      fail("non-positive box size: " + detail::describe(d));
    }
    if (!(d.score >= 0.0 && d.score <= 1.0)) {
      fail("score outside [0,1]: " + detail::describe(d));
    }
    if (!have_dim) {
      seq.feature_dim_ = static_cast<std::size_t>(d.feature.size());
      have_dim = true;
    } else if (static_cast<std::size_t>(d.feature.size()) != seq.feature_dim_) {
      fail("inconsistent feature dimension: " + detail::describe(d) + " has " +
           std::to_string(d.feature.size()) + ", expected " + std::to_string(seq.feature_dim_));
    }
    if (d.has_context()) {
      if (!have_ctx) {
        seq.context_dim_ = static_cast<std::size_t>(d.context_feature.size());
        have_ctx = true;
      } else if (static_cast<std::size_t>(d.context_feature.size()) != seq.context_dim_) {
        fail("inconsistent context dimension: " + detail::describe(d));
      }
    }
    const int shot_index = seq.shot_index_of_frame(d.frame);
    if (shot_index < 0) {
      fail("out-of-shot: " + detail::describe(d));
    }
    seq.by_shot_frame_[static_cast<std::size_t>(shot_index)][d.frame].push_back(i);
  }
  seq.detections_ = std::move(detections);

  for (auto& frames : seq.by_shot_frame_) {
    for (auto& [frame, members] : frames) {
      std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
        return seq.detections_[a].id < seq.detections_[b].id;
      });
    }
  }
  return seq;
}

}  // namespace adaptrack
