#pragma once

// Per-shot tracklet construction with the two-threshold linking rule:
// a detection joins an open tracklet only when the pair is both strong
// (above theta_high) and unambiguous (beats every competitor in its row and
// column by theta_high - theta_low).

#include "adaptrack/core.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace adaptrack {

struct LinkAffinityConfig {
  double w_app = 0.4;
  double w_pos = 0.4;
  double w_scale = 0.2;
  double theta_high = 0.8;
  double theta_low = 0.5;
  int max_gap = 1;
  std::size_t min_length = 5;

  void validate() const {
    auto fail = [](const std::string& what) {
      throw Error(ErrorKind::validation, "LinkAffinityConfig: " + what);
    };
    if (w_app < 0.0 || w_pos < 0.0 || w_scale < 0.0) fail("weights must be non-negative");
    if (std::abs(w_app + w_pos + w_scale - 1.0) > 1e-9) fail("weights must sum to 1");
    if (!(theta_low >= 0.0 && theta_low < theta_high && theta_high <= 1.0)) {
      fail("require 0 <= theta_low < theta_high <= 1");
    }
    if (max_gap < 1) fail("max_gap must be >= 1");
  }
};

/// Affinity in [0,1] between an earlier detection d1 and a later detection
/// d2 of the same shot.
inline double pair_affinity(const Detection& d1, const Detection& d2, const LinkAffinityConfig& cfg) {
  if (d1.frame >= d2.frame) {
    throw Error(ErrorKind::precondition, "pair_affinity: d1 must precede d2");
  }
  if (d2.frame - d1.frame > cfg.max_gap) {
    throw Error(ErrorKind::precondition, "pair_affinity: frame gap exceeds max_gap");
  }
  if (d1.feature.size() != d2.feature.size() || d1.feature.size() == 0) {
    throw Error(ErrorKind::dimension_mismatch, "pair_affinity: feature dimensions differ");
  }
  const double dims = static_cast<double>(d1.feature.size());
  const double s_app = std::exp(-(d1.feature - d2.feature).squaredNorm() / dims);
  const double dx = d1.bbox.cx() - d2.bbox.cx();
  const double dy = d1.bbox.cy() - d2.bbox.cy();
  const double s_pos = std::exp(-(dx * dx + dy * dy) / d1.bbox.area());
  const double a1 = d1.bbox.area();
  const double a2 = d2.bbox.area();
  const double s_scale = std::min(a1, a2) / std::max(a1, a2);
  return cfg.w_app * s_app + cfg.w_pos * s_pos + cfg.w_scale * s_scale;
}

/// Links detections frame by frame inside each shot. Output tracklets are
/// numbered from 1 in (shot, first frame, first detection id) order and
/// tracklets shorter than cfg.min_length are dropped.
inline std::vector<Tracklet> build_tracklets(const Sequence& seq, const LinkAffinityConfig& cfg) {
  cfg.validate();
  const double margin = cfg.theta_high - cfg.theta_low;
  const auto& dets = seq.detections();

  std::vector<Tracklet> out;
  for (std::size_t s = 0; s < seq.shots().size(); ++s) {
    std::vector<std::vector<std::size_t>> chains;  // detection indices
    std::vector<std::size_t> open;                 // chain indices

    for (const auto& [frame, members] : seq.frames_of_shot(s)) {
      std::vector<std::size_t> live;
      for (std::size_t c : open) {
        if (frame - dets[chains[c].back()].frame <= cfg.max_gap) live.push_back(c);
      }

      const std::size_t rows = live.size();
      const std::size_t cols = members.size();
      Matrix aff = Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          aff(r, c) = pair_affinity(dets[chains[live[r]].back()], dets[members[c]], cfg);
        }
      }

      std::vector<bool> taken(cols, false);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          const double a = aff(r, c);
          if (!(a > cfg.theta_high)) continue;
          double second = 0.0;
          for (std::size_t c2 = 0; c2 < cols; ++c2) {
            if (c2 != c) second = std::max(second, aff(r, c2));
          }
          for (std::size_t r2 = 0; r2 < rows; ++r2) {
            if (r2 != r) second = std::max(second, aff(r2, c));
          }
          if (a - second >= margin) {
            chains[live[r]].push_back(members[c]);
            taken[c] = true;
          }
        }
      }

      open = live;
      for (std::size_t c = 0; c < cols; ++c) {
        if (!taken[c]) {
          open.push_back(chains.size());
          chains.push_back({members[c]});
        }
      }
    }

    for (const auto& chain : chains) {
      if (chain.size() < cfg.min_length) continue;
      Tracklet t;
      t.shot_id = seq.shots()[s].shot_id;
      for (std::size_t i : chain) {
        t.detections.push_back(dets[i].id);
        t.frames.push_back(dets[i].frame);
      }
      out.push_back(std::move(t));
    }
  }

  std::stable_sort(out.begin(), out.end(), [&](const Tracklet& a, const Tracklet& b) {
    const int sa = seq.shot_index_of_frame(a.first_frame());
    const int sb = seq.shot_index_of_frame(b.first_frame());
    if (sa != sb) return sa < sb;
    if (a.first_frame() != b.first_frame()) return a.first_frame() < b.first_frame();
    return a.detections.front() < b.detections.front();
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].tracklet_id = static_cast<int>(i) + 1;
  return out;
}

}  // namespace adaptrack
