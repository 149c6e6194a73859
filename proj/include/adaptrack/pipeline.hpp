#pragma once

// End-to-end orchestration: configuration, the staged tracking run and the
// subcommand bodies used by the command-line tool.

#include "adaptrack/constraints.hpp"
#include "adaptrack/core.hpp"
#include "adaptrack/embedder.hpp"
#include "adaptrack/io.hpp"
#include "adaptrack/linker.hpp"
#include "adaptrack/metrics.hpp"
#include "adaptrack/synth.hpp"
#include "adaptrack/tracklets.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace adaptrack {

using json = nlohmann::json;

struct PipelineConfig {
  LinkAffinityConfig affinity;
  ContextConfig context;
  LossConfig loss;
  TrainConfig train;
  LinkerConfig linker;
  ScenarioConfig scenario;

  std::vector<std::size_t> hidden_layers{64};
  std::size_t embedding_dim = 64;
  std::size_t max_triplets_per_negpair = 200;
  std::size_t max_pairs = 20000;
  std::optional<double> theta;  // unset: per-loss default
  double iou_threshold = 0.5;
  std::uint64_t seed = 1;

  std::string detections_file = "detections.txt";
  std::string shots_file = "shots.txt";
  std::string ground_truth_file = "groundtruth.txt";

  PipelineConfig() {
    // desk-scale training defaults for the small fully connected network
    train.learning_rate = 1e-3;
    train.momentum = 0.9;
    train.weight_decay = 1e-4;
    train.batch_size = 128;
    train.epochs = 30;
  }

  /// HAC stop threshold: explicit value, else 0.4 for contrastive-trained
  /// embeddings and 5 for the triplet family.
  double effective_theta() const {
    if (theta) return *theta;
    return loss.kind == LossKind::contrastive ? 0.4 : 5.0;
  }

  LinkerConfig effective_linker() const {
    LinkerConfig l = linker;
    l.theta = effective_theta();
    return l;
  }

  void validate() const {
    affinity.validate();
    context.validate();
    loss.validate();
    train.validate();
    effective_linker().validate();
    scenario.validate();
    if (embedding_dim == 0) throw Error(ErrorKind::validation, "embedding_dim must be positive");
    for (std::size_t h : hidden_layers) {
      if (h == 0) throw Error(ErrorKind::validation, "hidden layer sizes must be positive");
    }
    if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw Error(ErrorKind::validation, "iou_threshold must lie in (0,1]");
  }
};

// ---------------------------------------------------------------------------
// JSON mapping. Every key is optional; missing keys keep their defaults.

namespace detail {

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline json to_json(const PipelineConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["affinity"] = {{"w_app", c.affinity.w_app},           {"w_pos", c.affinity.w_pos},
                   {"w_scale", c.affinity.w_scale},       {"theta_high", c.affinity.theta_high},
                   {"theta_low", c.affinity.theta_low},   {"max_gap", c.affinity.max_gap},
                   {"min_length", c.affinity.min_length}};
  j["context"] = {{"enabled", c.context.enabled},
                  {"merge_threshold", c.context.merge_threshold},
                  {"min_confidence_margin", c.context.margin()}};
  j["loss"] = {{"kind", to_string(c.loss.kind)}, {"tau", c.loss.tau}, {"alpha", c.loss.alpha}};
  j["train"] = {{"learning_rate", c.train.learning_rate}, {"momentum", c.train.momentum},
                {"weight_decay", c.train.weight_decay},   {"batch_size", c.train.batch_size},
                {"epochs", c.train.epochs}};
  j["model"] = {{"hidden_layers", c.hidden_layers}, {"embedding_dim", c.embedding_dim}};
  j["mining"] = {{"max_triplets_per_negpair", c.max_triplets_per_negpair}, {"max_pairs", c.max_pairs}};
  j["linker"] = {{"min_cluster_tracklets", c.linker.min_cluster_tracklets},
                 {"min_cluster_frames", c.linker.min_cluster_frames},
                 {"linkage", to_string(c.linker.linkage)},
                 {"within_shot_gate", c.linker.within_shot_gate},
                 {"within_shot_max_gap", c.linker.within_shot_max_gap},
                 {"w_appearance", c.linker.w_appearance},
                 {"w_kinematic", c.linker.w_kinematic},
                 {"w_temporal", c.linker.w_temporal}};
  if (c.theta) j["linker"]["theta"] = *c.theta;  // absent: per-loss default
  const ScenarioConfig& s = c.scenario;
  j["scenario"] = {{"n_identities", s.n_identities},
                   {"n_shots", s.n_shots},
                   {"frames_per_shot", s.frames_per_shot},
                   {"detections_per_identity_per_shot", s.detections_per_identity_per_shot},
                   {"feature_dim", s.feature_dim},
                   {"identity_separation", s.identity_separation},
                   {"shot_shift_scale", s.shot_shift_scale},
                   {"noise_sigma", s.noise_sigma},
                   {"context_dim", s.context_dim},
                   {"context_separation", s.context_separation},
                   {"context_fidelity", s.context_fidelity},
                   {"occlusion_rate", s.occlusion_rate},
                   {"fp_rate", s.fp_rate},
                   {"box_size", s.box_size}};
  j["evaluation"] = {{"iou_threshold", c.iou_threshold}};
  j["io"] = {{"detections", c.detections_file}, {"shots", c.shots_file}, {"ground_truth", c.ground_truth_file}};
  return j;
}

inline void apply_json(const json& j, PipelineConfig& c) {
  using detail::read_key;
  read_key(j, "seed", c.seed);
  if (j.contains("affinity")) {
    const json& a = j["affinity"];
    read_key(a, "w_app", c.affinity.w_app);
    read_key(a, "w_pos", c.affinity.w_pos);
    read_key(a, "w_scale", c.affinity.w_scale);
    read_key(a, "theta_high", c.affinity.theta_high);
    read_key(a, "theta_low", c.affinity.theta_low);
    read_key(a, "max_gap", c.affinity.max_gap);
    read_key(a, "min_length", c.affinity.min_length);
  }
  if (j.contains("context")) {
    const json& a = j["context"];
    read_key(a, "enabled", c.context.enabled);
    read_key(a, "merge_threshold", c.context.merge_threshold);
    read_key(a, "min_confidence_margin", c.context.min_confidence_margin);
  }
  if (j.contains("loss")) {
    const json& a = j["loss"];
    if (a.contains("kind")) c.loss.kind = parse_loss_kind(a["kind"].get<std::string>());
    read_key(a, "tau", c.loss.tau);
    read_key(a, "alpha", c.loss.alpha);
  }
  if (j.contains("train")) {
    const json& a = j["train"];
    read_key(a, "learning_rate", c.train.learning_rate);
    read_key(a, "momentum", c.train.momentum);
    read_key(a, "weight_decay", c.train.weight_decay);
    read_key(a, "batch_size", c.train.batch_size);
    read_key(a, "epochs", c.train.epochs);
  }
  if (j.contains("model")) {
    read_key(j["model"], "hidden_layers", c.hidden_layers);
    read_key(j["model"], "embedding_dim", c.embedding_dim);
  }
  if (j.contains("mining")) {
    read_key(j["mining"], "max_triplets_per_negpair", c.max_triplets_per_negpair);
    read_key(j["mining"], "max_pairs", c.max_pairs);
  }
  if (j.contains("linker")) {
    const json& a = j["linker"];
    if (a.contains("theta")) c.theta = a["theta"].get<double>();
    read_key(a, "min_cluster_tracklets", c.linker.min_cluster_tracklets);
    read_key(a, "min_cluster_frames", c.linker.min_cluster_frames);
    if (a.contains("linkage")) c.linker.linkage = parse_linkage(a["linkage"].get<std::string>());
    read_key(a, "within_shot_gate", c.linker.within_shot_gate);
    read_key(a, "within_shot_max_gap", c.linker.within_shot_max_gap);
    read_key(a, "w_appearance", c.linker.w_appearance);
    read_key(a, "w_kinematic", c.linker.w_kinematic);
    read_key(a, "w_temporal", c.linker.w_temporal);
  }
  if (j.contains("scenario")) {
    const json& a = j["scenario"];
    ScenarioConfig& s = c.scenario;
    read_key(a, "n_identities", s.n_identities);
    read_key(a, "n_shots", s.n_shots);
    read_key(a, "frames_per_shot", s.frames_per_shot);
    read_key(a, "detections_per_identity_per_shot", s.detections_per_identity_per_shot);
    read_key(a, "feature_dim", s.feature_dim);
    read_key(a, "identity_separation", s.identity_separation);
    read_key(a, "shot_shift_scale", s.shot_shift_scale);
    read_key(a, "noise_sigma", s.noise_sigma);
    read_key(a, "context_dim", s.context_dim);
    read_key(a, "context_separation", s.context_separation);
    read_key(a, "context_fidelity", s.context_fidelity);
    read_key(a, "occlusion_rate", s.occlusion_rate);
    read_key(a, "fp_rate", s.fp_rate);
    read_key(a, "box_size", s.box_size);
  }
  if (j.contains("evaluation")) read_key(j["evaluation"], "iou_threshold", c.iou_threshold);
  if (j.contains("io")) {
    read_key(j["io"], "detections", c.detections_file);
    read_key(j["io"], "shots", c.shots_file);
    read_key(j["io"], "ground_truth", c.ground_truth_file);
  }
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open config '" + path + "'");
  PipelineConfig c;
  try {
    apply_json(json::parse(in), c);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::validation, "config '" + path + "': " + e.what());
  }
  return c;
}

/// 64-bit FNV-1a over the canonical (sorted-key) JSON rendering.
inline std::string config_hash(const PipelineConfig& c) {
  const std::string text = to_json(c).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Staged run

/// A failure inside a named pipeline stage.
class StageError : public Error {
 public:
  StageError(int index, std::string stage, const Error& cause)
      : Error(cause.kind(), "stage " + std::to_string(index) + " (" + stage + "): " + cause.what()),
        index_(index),
        stage_(std::move(stage)) {}

  int index() const { return index_; }
  const std::string& stage() const { return stage_; }

 private:
  int index_;
  std::string stage_;
};

struct StageRecord {
  int index = 0;
  std::string name;
  json detail;
};

struct PipelineResult {
  std::vector<Tracklet> tracklets;
  ConstraintSet constraints;
  ContextReport context_report;
  TrainResult training;
  EmbeddingTable embeddings;
  std::vector<LinkedTracklet> shot_tracklets;
  std::vector<Trajectory> trajectories;
  std::map<int, int> assignments;  // detection id -> identity
  std::vector<StageRecord> stages;
};

namespace detail {

template <typename Fn>
void run_stage(std::vector<StageRecord>& log, int index, const std::string& name, Fn&& fn) {
  json detail;
  try {
    fn(detail);
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(index, name, e);
  } catch (const std::exception& e) {
    throw StageError(index, name, Error(ErrorKind::numeric, e.what()));
  }
  log.push_back({index, name, std::move(detail)});
}

}  // namespace detail

/// Features of every detection referenced by the constraints, with pair and
/// triplet samples for the configured loss. Contrastive pairs are capped at
/// max_pairs (half positive, half negative) by seeded sampling.
inline TrainingData make_training_data(const Sequence& seq, const ConstraintSet& cs, const PipelineConfig& cfg) {
  TrainingData data;
  std::map<int, std::size_t> slot;
  auto index = [&](int det) {
    auto [it, fresh] = slot.emplace(det, data.inputs.size());
    if (fresh) data.inputs.push_back(seq.detection(det).feature);
    return it->second;
  };
  if (cfg.loss.kind == LossKind::contrastive) {
    std::mt19937_64 rng(cfg.seed ^ 0x5bd1e995ull);
    auto take = [&](const std::vector<IdPair>& src, std::size_t cap, bool positive) {
      std::vector<std::size_t> pick(src.size());
      std::iota(pick.begin(), pick.end(), std::size_t{0});
      if (cap > 0 && pick.size() > cap) {
        std::shuffle(pick.begin(), pick.end(), rng);
        pick.resize(cap);
        std::sort(pick.begin(), pick.end());
      }
      for (std::size_t i : pick) data.pairs.push_back({index(src[i].first), index(src[i].second), positive});
    };
    const std::size_t cap = cfg.max_pairs / 2;
    take(cs.positives, cap, true);
    take(cs.negatives, cap, false);
  } else {
    for (const auto& t : cs.triplets) data.triplets.push_back({index(t[0]), index(t[1]), index(t[2])});
  }
  return data;
}

inline EmbeddingTable embed_all(const EmbeddingModel& model, const Sequence& seq) {
  EmbeddingTable table;
  for (const auto& d : seq.detections()) table.emplace(d.id, model.forward(d.feature));
  return table;
}

/// Raw input features used as embeddings (no adaptation).
inline EmbeddingTable raw_features(const Sequence& seq) {
  EmbeddingTable table;
  for (const auto& d : seq.detections()) table.emplace(d.id, d.feature);
  return table;
}

/// Runs stages 1..9 on a validated sequence.
inline PipelineResult run_pipeline(const Sequence& seq, const PipelineConfig& cfg) {
  cfg.validate();
  PipelineResult r;
  auto& log = r.stages;

  detail::run_stage(log, 1, "build_tracklets", [&](json& d) {
    r.tracklets = build_tracklets(seq, cfg.affinity);
    d["tracklets"] = r.tracklets.size();
  });
  detail::run_stage(log, 2, "mine_spatiotemporal", [&](json& d) {
    r.constraints = mine_spatiotemporal(r.tracklets);
    d["positives"] = r.constraints.positives.size();
    d["negatives"] = r.constraints.negatives.size();
  });
  detail::run_stage(log, 3, "mine_contextual", [&](json& d) {
    ContextOutcome o = mine_contextual(r.tracklets, seq, cfg.context, std::move(r.constraints));
    r.constraints = std::move(o.constraints);
    r.context_report = o.report;
    d["skipped"] = o.report.skipped;
    if (o.report.skipped) d["reason"] = o.report.reason;
    d["groups_accepted"] = o.report.groups_accepted;
    d["tracklet_pairs_added"] = o.report.pairs_added;
    d["conflicts"] = o.report.conflicts;
  });
  detail::run_stage(log, 4, "propagate_transitive", [&](json& d) {
    r.constraints = propagate_transitive(r.constraints, r.tracklets);
    d["positives"] = r.constraints.positives.size();
    d["negatives"] = r.constraints.negatives.size();
    d["tracklet_pos"] = r.constraints.tracklet_pos.size();
    d["tracklet_neg"] = r.constraints.tracklet_neg.size();
  });
  detail::run_stage(log, 5, "generate_triplets", [&](json& d) {
    r.constraints.triplets = generate_triplets(r.constraints, r.tracklets, cfg.max_triplets_per_negpair, cfg.seed);
    d["triplets"] = r.constraints.triplets.size();
  });
  detail::run_stage(log, 6, "train", [&](json& d) {
    std::vector<std::size_t> sizes{seq.feature_dim()};
    sizes.insert(sizes.end(), cfg.hidden_layers.begin(), cfg.hidden_layers.end());
    sizes.push_back(cfg.embedding_dim);
    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    const TrainingData data = make_training_data(seq, r.constraints, cfg);
    r.training = train(EmbeddingModel::random(sizes, cfg.seed), data, cfg.loss, tc);
    d["loss"] = to_string(cfg.loss.kind);
    d["samples"] = cfg.loss.kind == LossKind::contrastive ? data.pairs.size() : data.triplets.size();
    d["epochs"] = r.training.epoch_loss.size();
  });
  detail::run_stage(log, 7, "embed", [&](json& d) {
    r.embeddings = embed_all(r.training.model, seq);
    d["detections"] = r.embeddings.size();
  });
  const LinkerConfig linker = cfg.effective_linker();
  detail::run_stage(log, 8, "link_within_shot", [&](json& d) {
    r.shot_tracklets = link_all_shots(r.tracklets, seq, r.embeddings, linker);
    d["shot_tracklets"] = r.shot_tracklets.size();
  });
  detail::run_stage(log, 9, "link_across_shots", [&](json& d) {
    r.trajectories = link_across_shots(r.shot_tracklets, r.embeddings, linker);
    std::map<int, const Tracklet*> by_id;
    for (const auto& t : r.tracklets) by_id[t.tracklet_id] = &t;
    for (const auto& traj : r.trajectories) {
      for (int tid : traj.tracklet_ids) {
        for (int det : by_id.at(tid)->detections) r.assignments[det] = traj.identity;
      }
    }
    d["trajectories"] = r.trajectories.size();
    d["theta"] = linker.theta;
  });
  return r;
}

// ---------------------------------------------------------------------------
// Subcommands

namespace fs = std::filesystem;

inline Sequence load_sequence(const fs::path& dir, const PipelineConfig& cfg) {
  auto dets_in = io::detail::open_in((dir / cfg.detections_file).string());
  auto shots_in = io::detail::open_in((dir / cfg.shots_file).string());
  return validate_sequence(io::read_detections(dets_in, cfg.detections_file), io::read_shots(shots_in, cfg.shots_file));
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorKind::io, "cannot create output directory '" + dir.string() + "'");
}

/// Writes detections, shots and ground truth for a generated scenario.
inline Scenario cmd_simulate(const PipelineConfig& cfg, const fs::path& out_dir) {
  ScenarioConfig sc = cfg.scenario;
  sc.seed = cfg.seed;
  Scenario s = generate(sc);
  ensure_dir(out_dir);
  auto d = io::detail::open_out((out_dir / cfg.detections_file).string());
  io::write_detections(d, s.detections);
  auto sh = io::detail::open_out((out_dir / cfg.shots_file).string());
  io::write_shots(sh, s.shots);
  auto gt = io::detail::open_out((out_dir / cfg.ground_truth_file).string());
  io::write_labels(gt, s.labels);
  return s;
}

/// Full tracking run from `in_dir` into `out_dir`. Output files:
/// tracklets.txt, constraints.txt, loss_trace.csv, model.txt,
/// trajectories.txt, assignments.txt, manifest.json.
inline PipelineResult cmd_track(const PipelineConfig& cfg, const fs::path& in_dir, const fs::path& out_dir) {
  cfg.validate();
  std::vector<StageRecord> load_log;
  Sequence seq;
  detail::run_stage(load_log, 0, "load_inputs", [&](json& d) {
    seq = load_sequence(in_dir, cfg);
    d["detections"] = seq.detections().size();
    d["shots"] = seq.shots().size();
  });
  PipelineResult r = run_pipeline(seq, cfg);
  r.stages.insert(r.stages.begin(), load_log.begin(), load_log.end());

  ensure_dir(out_dir);
  auto write = [&](const char* name, auto&& fn) {
    auto os = io::detail::open_out((out_dir / name).string());
    fn(os);
  };
  write("tracklets.txt", [&](std::ostream& os) { io::write_tracklets(os, r.tracklets); });
  write("constraints.txt", [&](std::ostream& os) { io::write_constraints(os, r.constraints); });
  write("loss_trace.csv", [&](std::ostream& os) { io::write_loss_trace(os, r.training.epoch_loss); });
  write("model.txt", [&](std::ostream& os) { save_model(os, r.training.model); });
  write("trajectories.txt", [&](std::ostream& os) { io::write_trajectories(os, r.trajectories); });
  write("assignments.txt", [&](std::ostream& os) { io::write_labels(os, r.assignments); });

  json manifest;
  manifest["tool"] = "adaptrack";
  manifest["config_hash"] = config_hash(cfg);
  manifest["seed"] = cfg.seed;
  manifest["loss"] = to_string(cfg.loss.kind);
  manifest["config"] = to_json(cfg);
  json stages = json::array();
  for (const auto& s : r.stages) {
    stages.push_back({{"index", s.index}, {"name", s.name}, {"status", "completed"}, {"detail", s.detail}});
  }
  manifest["stages"] = stages;
  manifest["outputs"] = {"tracklets.txt", "constraints.txt", "loss_trace.csv", "model.txt", "trajectories.txt",
                         "assignments.txt"};
  write("manifest.json", [&](std::ostream& os) { os << manifest.dump(2) << '\n'; });
  return r;
}

/// Purity of cluster_to_k over the tracklets for every k from 1 to the
/// tracklet count, computed from one agglomeration per k.
inline std::vector<io::PurityPoint> purity_curve(const std::vector<Tracklet>& tracks, const EmbeddingTable& emb,
                                                 const std::map<int, int>& labels, Linkage linkage = Linkage::average) {
  std::vector<io::PurityPoint> curve;
  if (tracks.empty()) return curve;
  const Matrix d = tracklet_distance_matrix(tracks, emb);
  for (std::size_t k = 1; k <= tracks.size(); ++k) {
    const KClustering kc = cluster_to_k(d, k, linkage);
    std::vector<std::vector<int>> clusters;
    for (const auto& c : kc.clusters) {
      std::vector<int> ids;
      for (std::size_t i : c) {
        for (int det : tracks[i].detections) ids.push_back(labels.at(det));
      }
      clusters.push_back(std::move(ids));
    }
    curve.push_back({k, weighted_purity(clusters)});
  }
  return curve;
}

/// Number of distinct labels carried by the tracklets' detections
/// (background counts as one label).
inline std::size_t ideal_cluster_count(const std::vector<Tracklet>& tracks, const std::map<int, int>& labels) {
  std::set<int> seen;
  for (const auto& t : tracks) {
    for (int det : t.detections) seen.insert(labels.at(det));
  }
  return seen.size();
}

/// Weighted purity of cluster_to_k at the ideal cluster count.
inline double purity_at_ideal_k(const std::vector<Tracklet>& tracks, const EmbeddingTable& emb,
                                const std::map<int, int>& labels, Linkage linkage = Linkage::average) {
  const std::size_t k = std::min(ideal_cluster_count(tracks, labels), tracks.size());
  const KClustering kc = cluster_to_k(tracks, emb, k, linkage);
  std::vector<std::vector<int>> clusters;
  for (const auto& c : kc.clusters) {
    std::vector<int> ids;
    for (std::size_t i : c) {
      for (int det : tracks[i].detections) ids.push_back(labels.at(det));
    }
    clusters.push_back(std::move(ids));
  }
  return weighted_purity(clusters);
}

/// Hypothesis boxes from an identity assignment.
inline FrameBoxes hypothesis_boxes(const Sequence& seq, const std::map<int, int>& assignments) {
  FrameBoxes hyp;
  if (!seq.shots().empty()) {
    hyp.first_frame = seq.shots().front().start_frame;
    hyp.last_frame = seq.shots().back().end_frame;
  }
  for (const auto& [det, identity] : assignments) {
    const Detection& d = seq.detection(det);
    hyp.frames[d.frame].push_back({identity, d.bbox});
  }
  return hyp;
}

struct EvaluationResult {
  MotReport mot;
  std::size_t ideal_k = 0;
  double purity_ideal_k = 0.0;
  double trajectory_purity = 0.0;
  std::vector<io::PurityPoint> curve;
};

/// Scores a tracking run: CLEAR-MOT / identity metrics from the
/// assignments, purity at the ideal cluster count and the purity-vs-k
/// curve from the saved model. Writes report.txt, report.csv and
/// purity_curve.csv to `out_dir`.
inline EvaluationResult cmd_evaluate(const PipelineConfig& cfg, const fs::path& data_dir, const fs::path& results_dir,
                                     const fs::path& out_dir) {
  const Sequence seq = load_sequence(data_dir, cfg);
  auto gt_in = io::detail::open_in((data_dir / cfg.ground_truth_file).string());
  const std::map<int, int> labels = io::read_labels(gt_in, cfg.ground_truth_file);
  for (const auto& d : seq.detections()) {
    if (!labels.count(d.id)) throw Error(ErrorKind::validation, "ground truth lacks detection " + std::to_string(d.id));
  }
  auto tr_in = io::detail::open_in((results_dir / "tracklets.txt").string());
  const std::vector<Tracklet> tracks = io::read_tracklets(tr_in, seq);
  auto as_in = io::detail::open_in((results_dir / "assignments.txt").string());
  const std::map<int, int> assignments = io::read_labels(as_in, "assignments.txt");
  for (const auto& [det, identity] : assignments) {
    if (!seq.contains(det)) throw Error(ErrorKind::validation, "assignment refers to unknown detection " + std::to_string(det));
  }
  auto model_in = io::detail::open_in((results_dir / "model.txt").string());
  const EmbeddingModel model = load_model(model_in);
  const EmbeddingTable emb = embed_all(model, seq);

  EvaluationResult ev;
  ev.mot = clear_mot(hypothesis_boxes(seq, assignments), ground_truth_boxes(seq, labels), cfg.iou_threshold);
  if (!tracks.empty()) {
    ev.ideal_k = ideal_cluster_count(tracks, labels);
    ev.purity_ideal_k = purity_at_ideal_k(tracks, emb, labels, cfg.linker.linkage);
    ev.curve = purity_curve(tracks, emb, labels, cfg.linker.linkage);
  }
  if (!assignments.empty()) {
    std::map<int, std::vector<int>> by_identity;
    for (const auto& [det, identity] : assignments) by_identity[identity].push_back(labels.at(det));
    std::vector<std::vector<int>> clusters;
    for (auto& [id, members] : by_identity) clusters.push_back(std::move(members));
    ev.trajectory_purity = weighted_purity(clusters);
  }

  ensure_dir(out_dir);
  const MotReport& m = ev.mot;
  {
    auto os = io::detail::open_out((out_dir / "report.txt").string());
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "%-10s %8s %8s %8s %8s %6s %6s %8s %8s %8s %8s %8s\n"
                  "%-10s %8.4f %8.4f %8.4f %8.4f %6zu %6zu %8.4f %8.4f %8.4f %8.4f %8.4f\n",
                  "", "Recall", "Prec", "F1", "FAF", "IDS", "Frag", "MOTA", "MOTP", "IDP", "IDR", "IDF1", "tracking",
                  m.recall, m.precision, m.f1, m.faf, m.ids, m.frag, m.mota, m.motp, m.idp, m.idr, m.idf1);
    os << buf;
    std::snprintf(buf, sizeof buf, "purity at ideal k (k=%zu): %.4f\ntrajectory purity: %.4f\n", ev.ideal_k,
                  ev.purity_ideal_k, ev.trajectory_purity);
    os << buf;
  }
  {
    auto os = io::detail::open_out((out_dir / "report.csv").string());
    os << "recall,precision,f1,faf,ids,frag,mota,motp,idp,idr,idf1,ideal_k,purity_ideal_k,trajectory_purity\n";
    using io::detail::fmt;
    os << fmt(m.recall) << ',' << fmt(m.precision) << ',' << fmt(m.f1) << ',' << fmt(m.faf) << ',' << m.ids << ','
       << m.frag << ',' << fmt(m.mota) << ',' << fmt(m.motp) << ',' << fmt(m.idp) << ',' << fmt(m.idr) << ','
       << fmt(m.idf1) << ',' << ev.ideal_k << ',' << fmt(ev.purity_ideal_k) << ',' << fmt(ev.trajectory_purity)
       << '\n';
  }
  {
    auto os = io::detail::open_out((out_dir / "purity_curve.csv").string());
    io::write_purity_curve(os, ev.curve);
  }
  return ev;
}

struct GradCheckRun {
  std::vector<GradCheckSummary> per_loss;
  bool passed = true;
};

/// Finite-difference check of all three losses on seeded random models
/// with up to three hidden layers.
inline GradCheckRun cmd_gradcheck(const PipelineConfig& cfg, double tolerance, std::size_t samples = 50,
                                  double epsilon = 1e-5) {
  GradCheckRun run;
  std::uint64_t salt = 0;
  for (LossKind k : {LossKind::contrastive, LossKind::triplet, LossKind::symtriplet}) {
    GradCheckSummary s = grad_check_random(k, samples, 3, cfg.seed * 1000003ull + salt++, epsilon, tolerance, cfg.loss);
    run.passed = run.passed && s.passed;
    run.per_loss.push_back(s);
  }
  return run;
}

/// Minimal SVG line plot of a purity curve.
inline void write_purity_svg(std::ostream& os, const std::vector<io::PurityPoint>& curve) {
  const double width = 640, height = 400, pad = 50;
  std::size_t kmax = 1;
  for (const auto& p : curve) kmax = std::max(kmax, p.num_clusters);
  auto px = [&](double k) { return pad + (width - 2 * pad) * (kmax > 1 ? (k - 1) / static_cast<double>(kmax - 1) : 0.5); };
  auto py = [&](double w) { return height - pad - (height - 2 * pad) * w; };
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << pad << "\" y1=\"" << py(0) << "\" x2=\"" << width - pad << "\" y2=\"" << py(0)
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << pad << "\" y1=\"" << py(0) << "\" x2=\"" << pad << "\" y2=\"" << py(1)
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << width / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">number of clusters</text>\n";
  os << "<text x=\"12\" y=\"" << height / 2 << "\" transform=\"rotate(-90 12 " << height / 2
     << ")\" text-anchor=\"middle\">weighted purity</text>\n";
  os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (const auto& p : curve) os << px(static_cast<double>(p.num_clusters)) << ',' << py(p.weighted_purity) << ' ';
  os << "\"/>\n</svg>\n";
}

}  // namespace adaptrack
