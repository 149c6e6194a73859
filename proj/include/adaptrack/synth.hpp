#pragma once

// Seeded synthetic scenarios with known identities. Identities sit on a
// regular simplex in feature space; every (shot, identity) gets its own
// appearance drift, so raw features of one person differ across shots
// while staying tight inside a shot.

#include "adaptrack/core.hpp"
#include "adaptrack/metrics.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

namespace adaptrack {

inline constexpr int kBackground = 0;

struct ScenarioConfig {
  int n_identities = 6;
  int n_shots = 4;
  int frames_per_shot = 40;
  int detections_per_identity_per_shot = 40;
  int feature_dim = 32;
  double identity_separation = 2.0;
  double shot_shift_scale = 4.0;
  double noise_sigma = 0.1;
  int context_dim = 16;
  double context_separation = 12.0;
  double context_fidelity = 1.0;
  double occlusion_rate = 0.02;
  double fp_rate = 0.0;
  double box_size = 80.0;
  std::uint64_t seed = 1;

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::validation, "ScenarioConfig: " + what); };
    if (n_identities < 1) fail("n_identities must be >= 1");
    if (n_shots < 1) fail("n_shots must be >= 1");
    if (frames_per_shot < 1) fail("frames_per_shot must be >= 1");
    if (detections_per_identity_per_shot < 1 || detections_per_identity_per_shot > frames_per_shot) {
      fail("detections_per_identity_per_shot must lie in [1, frames_per_shot]");
    }
    if (feature_dim < n_identities) fail("feature_dim must be >= n_identities (simplex embedding)");
    if (context_dim > 0 && context_dim < n_identities) fail("context_dim must be 0 or >= n_identities");
    if (identity_separation < 0.0 || shot_shift_scale < 0.0 || noise_sigma < 0.0 || context_separation < 0.0) {
      fail("scales must be non-negative");
    }
    for (double p : {context_fidelity, occlusion_rate, fp_rate}) {
      if (!(p >= 0.0 && p <= 1.0)) fail("probabilities must lie in [0,1]");
    }
    if (!(box_size > 0.0)) fail("box_size must be > 0");
  }
};

struct Scenario {
  std::vector<Detection> detections;
  std::vector<Shot> shots;
  std::map<int, int> labels;  // detection id -> identity (kBackground for false positives)
};

namespace detail {

/// n points with pairwise distance `separation`, randomly rotated in R^dim.
inline std::vector<Vector> simplex_points(int n, int dim, double separation, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix g(dim, dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) g(r, c) = gauss(rng);
  }
  const Matrix q = Eigen::HouseholderQR<Matrix>(g).householderQ();
  std::vector<Vector> pts;
  for (int i = 0; i < n; ++i) pts.push_back(q.col(i) * (separation / std::sqrt(2.0)));
  return pts;
}

inline Vector random_direction(int dim, double norm, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = gauss(rng);
  const double len = v.norm();
  return len > 0.0 ? Vector(v * (norm / len)) : Vector(Vector::Zero(dim));
}

inline Vector add_noise(const Vector& base, double sigma, std::mt19937_64& rng) {
  if (sigma == 0.0) return base;
  std::normal_distribution<double> gauss(0.0, sigma);
  Vector v = base;
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += gauss(rng);
  return v;
}

}  // namespace detail

/// Generates detections, shots and hidden labels. Identities move linearly
/// on a grid of well-separated lanes; occlusion drops single detections;
/// false-positive bursts are short static tracks with outlier appearance.
inline Scenario generate(const ScenarioConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const auto centers = detail::simplex_points(cfg.n_identities, cfg.feature_dim, cfg.identity_separation, rng);
  std::vector<Vector> signatures;
  if (cfg.context_dim > 0) {
    signatures = detail::simplex_points(cfg.n_identities, cfg.context_dim, cfg.context_separation, rng);
  }
  const double outlier_norm = 3.0 * (cfg.identity_separation + cfg.shot_shift_scale) + 1.0;

  const int columns = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(cfg.n_identities))));
  const double spacing = 4.0 * cfg.box_size;

  struct Record {
    int frame;
    int order;  // identity index, or n_identities + burst index for false positives
    int identity;
    Detection det;
  };
  std::vector<Record> records;
  Scenario out;

  int burst = 0;
  for (int s = 0; s < cfg.n_shots; ++s) {
    const int start = s * cfg.frames_per_shot;
    const int end = start + cfg.frames_per_shot - 1;
    out.shots.push_back({s + 1, start, end});

    std::vector<int> slots(static_cast<std::size_t>(cfg.n_identities));
    for (int i = 0; i < cfg.n_identities; ++i) slots[static_cast<std::size_t>(i)] = i;
    std::shuffle(slots.begin(), slots.end(), rng);

    for (int id = 0; id < cfg.n_identities; ++id) {
      const Vector appearance =
          centers[static_cast<std::size_t>(id)] + detail::random_direction(cfg.feature_dim, cfg.shot_shift_scale, rng);
      Vector context;
      if (cfg.context_dim > 0) {
        context = unit(rng) < cfg.context_fidelity
                      ? signatures[static_cast<std::size_t>(id)]
                      : detail::random_direction(cfg.context_dim, cfg.context_separation, rng);
      }
      const int slot = slots[static_cast<std::size_t>(id)];
      const double x0 = spacing * (0.5 + slot % columns);
      const double y0 = spacing * (0.5 + slot / columns);
      const double vx = (unit(rng) - 0.5) * 3.0;
      const double vy = (unit(rng) - 0.5) * 3.0;
      const double w = cfg.box_size * (0.9 + 0.2 * unit(rng));
      const double h = 1.2 * w;
      const int span = cfg.detections_per_identity_per_shot;
      const int offset = span < cfg.frames_per_shot
                             ? std::uniform_int_distribution<int>(0, cfg.frames_per_shot - span)(rng)
                             : 0;
      for (int k = 0; k < span; ++k) {
        const int frame = start + offset + k;
        const bool occluded = unit(rng) < cfg.occlusion_rate;
        Detection d;
        d.frame = frame;
        d.bbox = {x0 + vx * k, y0 + vy * k, w, h};
        d.score = 0.9;
        d.feature = detail::add_noise(appearance, cfg.noise_sigma, rng);
        if (cfg.context_dim > 0) d.context_feature = detail::add_noise(context, cfg.noise_sigma, rng);
        if (!occluded) records.push_back({frame, id, id + 1, std::move(d)});
      }
    }

    for (int f = start; f <= end; ++f) {
      if (!(unit(rng) < cfg.fp_rate)) continue;
      const int length = std::uniform_int_distribution<int>(5, 10)(rng);
      const Vector appearance = detail::random_direction(cfg.feature_dim, outlier_norm, rng);
      Vector context;
      if (cfg.context_dim > 0) context = detail::random_direction(cfg.context_dim, cfg.context_separation, rng);
      const double x = spacing * columns * unit(rng);
      const double y = spacing * columns * unit(rng);
      const double w = cfg.box_size * (0.6 + 0.4 * unit(rng));
      for (int k = 0; k < length && f + k <= end; ++k) {
        Detection d;
        d.frame = f + k;
        d.bbox = {x, y, w, 1.2 * w};
        d.score = 0.5;
        d.feature = detail::add_noise(appearance, cfg.noise_sigma, rng);
        if (cfg.context_dim > 0) d.context_feature = detail::add_noise(context, cfg.noise_sigma, rng);
        records.push_back({f + k, cfg.n_identities + burst, kBackground, std::move(d)});
      }
      ++burst;
    }
  }

  std::stable_sort(records.begin(), records.end(), [](const Record& a, const Record& b) {
    return std::tie(a.frame, a.order) < std::tie(b.frame, b.order);
  });
  int next_id = 1;
  for (auto& r : records) {
    r.det.id = next_id++;
    out.labels[r.det.id] = r.identity;
    out.detections.push_back(std::move(r.det));
  }
  return out;
}

/// Hidden identity of every detection of a generated scenario (background
/// for false positives).
inline std::map<int, int> oracle_labels(const Sequence& seq, const Scenario& scenario) {
  std::map<int, int> out;
  for (const auto& d : seq.detections()) {
    auto it = scenario.labels.find(d.id);
    if (it == scenario.labels.end()) {
      throw Error(ErrorKind::validation, "detection " + std::to_string(d.id) + " is not part of the scenario");
    }
    out[d.id] = it->second;
  }
  return out;
}

/// Ground-truth boxes: every non-background detection, labelled with its
/// identity, over the full frame range of the sequence.
inline FrameBoxes ground_truth_boxes(const Sequence& seq, const std::map<int, int>& labels) {
  FrameBoxes gt;
  if (!seq.shots().empty()) {
    gt.first_frame = seq.shots().front().start_frame;
    gt.last_frame = seq.shots().back().end_frame;
  }
  for (const auto& d : seq.detections()) {
    auto it = labels.find(d.id);
    if (it == labels.end() || it->second == kBackground) continue;
    gt.frames[d.frame].push_back({it->second, d.bbox});
  }
  return gt;
}

}  // namespace adaptrack
