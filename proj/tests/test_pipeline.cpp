#include "adaptrack/pipeline.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "test_support.hpp"

using namespace adaptrack;
using adaptrack::testing::throws_error;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(::testing::TempDir()) / ("adaptrack_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

PipelineConfig quick_config() {
  PipelineConfig cfg;
  cfg.train.epochs = 8;
  return cfg;
}

}  // namespace

TEST(Config, JsonRoundTripPreservesEverything) {
  PipelineConfig cfg;
  cfg.seed = 99;
  cfg.loss.kind = LossKind::triplet;
  cfg.train.epochs = 7;
  cfg.hidden_layers = {32, 16};
  cfg.theta = 3.5;
  cfg.scenario.n_shots = 2;
  cfg.linker.linkage = Linkage::complete;
  PipelineConfig back;
  apply_json(to_json(cfg), back);
  EXPECT_EQ(to_json(back).dump(), to_json(cfg).dump());
  EXPECT_EQ(config_hash(back), config_hash(cfg));
  back.seed = 100;
  EXPECT_NE(config_hash(back), config_hash(cfg));
}

TEST(Config, ThetaDefaultsFollowLoss) {
  PipelineConfig cfg;
  cfg.loss.kind = LossKind::contrastive;
  EXPECT_DOUBLE_EQ(cfg.effective_theta(), 0.4);
  cfg.loss.kind = LossKind::symtriplet;
  EXPECT_DOUBLE_EQ(cfg.effective_theta(), 5.0);
  cfg.theta = 2.0;
  EXPECT_DOUBLE_EQ(cfg.effective_theta(), 2.0);
}

TEST(Config, DumpedDefaultsKeepPerLossTheta) {
  PipelineConfig back;
  apply_json(to_json(PipelineConfig{}), back);
  EXPECT_FALSE(back.theta.has_value());
  back.loss.kind = LossKind::contrastive;
  EXPECT_DOUBLE_EQ(back.effective_theta(), 0.4);
}

TEST(Config, PartialFileKeepsDefaults) {
  const fs::path p = scratch("partial.json");
  std::ofstream(p) << R"({"loss": {"kind": "contrastive"}, "train": {"epochs": 3}})";
  const PipelineConfig cfg = load_config(p.string());
  EXPECT_EQ(cfg.loss.kind, LossKind::contrastive);
  EXPECT_EQ(cfg.train.epochs, 3u);
  EXPECT_EQ(cfg.train.batch_size, PipelineConfig{}.train.batch_size);
  std::ofstream(p) << R"({"loss": {"kind": 5}})";
  EXPECT_TRUE(throws_error([&] { load_config(p.string()); }, ErrorKind::validation));
}

TEST(Simulate, WritesNonEmptyFilesDeterministically) {
  const PipelineConfig cfg = quick_config();
  const fs::path a = scratch("sim_a"), b = scratch("sim_b");
  cmd_simulate(cfg, a);
  cmd_simulate(cfg, b);
  for (const char* f : {"detections.txt", "shots.txt", "groundtruth.txt"}) {
    EXPECT_GT(fs::file_size(a / f), 0u);
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

TEST(Simulate, InvalidScenarioRejected) {
  PipelineConfig cfg;
  cfg.scenario.n_identities = 0;
  EXPECT_TRUE(throws_error([&] { cfg.validate(); }, ErrorKind::validation));
}

TEST(Track, ManifestListsAllStagesAndLoss) {
  for (LossKind k : {LossKind::contrastive, LossKind::triplet, LossKind::symtriplet}) {
    PipelineConfig cfg = quick_config();
    cfg.loss.kind = k;
    const fs::path data = scratch("track_data"), out = scratch(std::string("track_out_") + to_string(k));
    cmd_simulate(cfg, data);
    cmd_track(cfg, data, out);
    const json manifest = json::parse(slurp(out / "manifest.json"));
    EXPECT_EQ(manifest["loss"], to_string(k));
    EXPECT_EQ(manifest["config_hash"], config_hash(cfg));
    EXPECT_EQ(manifest["seed"], cfg.seed);
    const auto& stages = manifest["stages"];
    ASSERT_EQ(stages.size(), 10u);
    const std::vector<std::string> names{"load_inputs",       "build_tracklets", "mine_spatiotemporal", "mine_contextual",
                                         "propagate_transitive", "generate_triplets", "train", "embed",
                                         "link_within_shot", "link_across_shots"};
    for (std::size_t i = 0; i < names.size(); ++i) {
      EXPECT_EQ(stages[i]["index"], static_cast<int>(i));
      EXPECT_EQ(stages[i]["name"], names[i]);
      EXPECT_EQ(stages[i]["status"], "completed");
    }
    for (const char* f : {"tracklets.txt", "constraints.txt", "loss_trace.csv", "model.txt", "trajectories.txt",
                          "assignments.txt"}) {
      EXPECT_TRUE(fs::exists(out / f)) << f;
    }
  }
}

TEST(Track, MissingShotsFileIsStageZeroError) {
  const PipelineConfig cfg = quick_config();
  const fs::path data = scratch("track_missing");
  cmd_simulate(cfg, data);
  fs::remove(data / "shots.txt");
  try {
    cmd_track(cfg, data, scratch("track_missing_out"));
    FAIL() << "no error";
  } catch (const StageError& e) {
    EXPECT_EQ(e.index(), 0);
    EXPECT_EQ(e.stage(), "load_inputs");
    EXPECT_NE(std::string(e.what()).find("shots.txt"), std::string::npos);
  }
}

TEST(Track, ManifestReproducesRun) {
  PipelineConfig cfg = quick_config();
  cfg.seed = 5;
  const fs::path data = scratch("repro_data"), a = scratch("repro_a"), b = scratch("repro_b");
  cmd_simulate(cfg, data);
  cmd_track(cfg, data, a);
  PipelineConfig from_manifest;
  apply_json(json::parse(slurp(a / "manifest.json"))["config"], from_manifest);
  cmd_track(from_manifest, data, b);
  for (const char* f : {"trajectories.txt", "assignments.txt", "manifest.json", "model.txt", "loss_trace.csv"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
}

TEST(Evaluate, PerfectSyntheticRun) {
  PipelineConfig cfg = quick_config();
  cfg.scenario.shot_shift_scale = 0.0;
  cfg.scenario.identity_separation = 6.0;
  const fs::path data = scratch("eval_data"), res = scratch("eval_res"), rep = scratch("eval_rep");
  cmd_simulate(cfg, data);
  const PipelineResult run = cmd_track(cfg, data, res);
  const EvaluationResult ev = cmd_evaluate(cfg, data, res, rep);
  EXPECT_EQ(ev.ideal_k, static_cast<std::size_t>(cfg.scenario.n_identities));
  EXPECT_DOUBLE_EQ(ev.purity_ideal_k, 1.0);
  EXPECT_DOUBLE_EQ(ev.trajectory_purity, 1.0);
  EXPECT_GT(ev.mot.mota, 0.9);

  ASSERT_EQ(ev.curve.size(), run.tracklets.size());
  const auto lines = std::count(std::istreambuf_iterator<char>(*std::make_unique<std::ifstream>(rep / "purity_curve.csv")),
                                std::istreambuf_iterator<char>(), '\n');
  EXPECT_EQ(static_cast<std::size_t>(lines), run.tracklets.size() + 1);  // header
  for (std::size_t k = ev.ideal_k; k <= ev.curve.size(); ++k) EXPECT_DOUBLE_EQ(ev.curve[k - 1].weighted_purity, 1.0);
  for (std::size_t k = 1; k < ev.ideal_k; ++k) {
    EXPECT_LE(ev.curve[k - 1].weighted_purity, ev.curve[k].weighted_purity);
  }
  EXPECT_TRUE(fs::exists(rep / "report.txt"));
  EXPECT_TRUE(fs::exists(rep / "report.csv"));
}

TEST(Evaluate, IdMismatchRejected) {
  const PipelineConfig cfg = quick_config();
  const fs::path data = scratch("mismatch_data"), res = scratch("mismatch_res");
  cmd_simulate(cfg, data);
  cmd_track(cfg, data, res);
  std::ofstream(res / "assignments.txt", std::ios::app) << "999999 1\n";
  EXPECT_TRUE(throws_error([&] { cmd_evaluate(cfg, data, res, scratch("mismatch_rep")); }, ErrorKind::validation,
                           "999999"));
  std::ofstream(data / "groundtruth.txt") << "1 1\n";
  EXPECT_TRUE(throws_error([&] { cmd_evaluate(cfg, data, res, scratch("mismatch_rep")); }, ErrorKind::validation));
}

TEST(GradCheckCommand, PassesAtDefaultAndFailsAtTinyTolerance) {
  const PipelineConfig cfg;
  const GradCheckRun ok = cmd_gradcheck(cfg, 1e-4, 20);
  EXPECT_TRUE(ok.passed);
  ASSERT_EQ(ok.per_loss.size(), 3u);
  for (const auto& s : ok.per_loss) EXPECT_LE(s.max_rel_error, 1e-4);
  EXPECT_FALSE(cmd_gradcheck(cfg, 1e-12, 20).passed);
}

TEST(PurityPlot, SvgContainsPolyline) {
  std::ostringstream os;
  write_purity_svg(os, {{1, 0.3}, {2, 0.6}, {3, 1.0}});
  EXPECT_NE(os.str().find("<polyline"), std::string::npos);
  EXPECT_NE(os.str().find("</svg>"), std::string::npos);
}
