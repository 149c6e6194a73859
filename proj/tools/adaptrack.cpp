// adaptrack command-line tool.
//
//   adaptrack simulate  --out DIR
//   adaptrack track     --in DIR --out DIR
//   adaptrack evaluate  --data DIR --results DIR --out DIR
//   adaptrack gradcheck [--tolerance T] [--samples N]
//   adaptrack purity-curve --csv FILE [--svg FILE]
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 pipeline stage
// failure, 3 check failure (gradcheck).

#include "adaptrack/parallel.hpp"
#include "adaptrack/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>

namespace {

using namespace adaptrack;

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::string> loss;
  std::optional<double> theta;
  std::optional<std::size_t> epochs;
};

template <typename T>
std::optional<T> env_value(const char* name) {
  const char* raw = std::getenv(name);
  if (!raw || !*raw) return std::nullopt;
  try {
    return static_cast<T>(std::stoull(raw));
  } catch (const std::exception&) {
    throw Error(ErrorKind::validation, std::string("environment variable ") + name + " is not an integer");
  }
}

PipelineConfig resolve(const GlobalOptions& opt) {
  PipelineConfig cfg = opt.config_path.empty() ? PipelineConfig{} : load_config(opt.config_path);
  std::size_t threads = max_threads();
  if (auto s = env_value<std::uint64_t>("ADAPTRACK_SEED")) cfg.seed = *s;
  if (auto t = env_value<std::size_t>("ADAPTRACK_THREADS")) threads = *t;
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.threads) threads = *opt.threads;
  if (opt.loss) cfg.loss.kind = parse_loss_kind(*opt.loss);
  if (opt.theta) cfg.theta = *opt.theta;
  if (opt.epochs) cfg.train.epochs = *opt.epochs;
  if (threads == 0) throw Error(ErrorKind::validation, "thread count must be positive");
  set_max_threads(threads);
  cfg.validate();
  return cfg;
}

void print_ascii_curve(const std::vector<io::PurityPoint>& curve) {
  for (const auto& p : curve) {
    const int bar = static_cast<int>(p.weighted_purity * 50.0 + 0.5);
    std::printf("%5zu %.4f |%s\n", p.num_clusters, p.weighted_purity, std::string(static_cast<std::size_t>(bar), '#').c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tracking with constraint-mined adaptive appearance embeddings"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions opt;
  app.add_option("-c,--config", opt.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", opt.seed, "global seed (overrides ADAPTRACK_SEED)");
  app.add_option("--threads", opt.threads, "worker threads (overrides ADAPTRACK_THREADS)");
  app.add_option("--loss", opt.loss, "contrastive | triplet | symtriplet");
  app.add_option("--theta", opt.theta, "cross-shot linking threshold");
  app.add_option("--epochs", opt.epochs, "training epochs");

  std::string sim_out;
  auto* sim = app.add_subcommand("simulate", "generate a synthetic sequence with ground truth");
  sim->add_option("-o,--out", sim_out, "output directory")->required();

  std::string track_in, track_out;
  auto* track = app.add_subcommand("track", "run the tracking pipeline");
  track->add_option("-i,--in", track_in, "input directory")->required();
  track->add_option("-o,--out", track_out, "output directory")->required();

  std::string eval_data, eval_results, eval_out;
  auto* eval = app.add_subcommand("evaluate", "score a tracking run against ground truth");
  eval->add_option("--data", eval_data, "input directory with ground truth")->required();
  eval->add_option("--results", eval_results, "tracking output directory")->required();
  eval->add_option("-o,--out", eval_out, "report directory")->required();

  double gc_tol = 1e-4;
  std::size_t gc_samples = 50;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of all losses");
  gc->add_option("--tolerance", gc_tol, "maximum relative error");
  gc->add_option("--samples", gc_samples, "random samples per loss");

  std::string curve_csv, curve_svg;
  auto* curve = app.add_subcommand("purity-curve", "plot a purity-vs-cluster-count curve");
  curve->add_option("--csv", curve_csv, "purity_curve.csv from evaluate")->required()->check(CLI::ExistingFile);
  curve->add_option("--svg", curve_svg, "write an SVG plot here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const PipelineConfig cfg = resolve(opt);
    if (*sim) {
      const Scenario s = cmd_simulate(cfg, sim_out);
      std::printf("wrote %zu detections in %zu shots to %s\n", s.detections.size(), s.shots.size(), sim_out.c_str());
    } else if (*track) {
      const PipelineResult r = cmd_track(cfg, track_in, track_out);
      for (const auto& s : r.stages) std::printf("stage %d %-20s %s\n", s.index, s.name.c_str(), s.detail.dump().c_str());
      std::printf("config hash %s, %zu trajectories\n", config_hash(cfg).c_str(), r.trajectories.size());
    } else if (*eval) {
      const EvaluationResult ev = cmd_evaluate(cfg, eval_data, eval_results, eval_out);
      std::ifstream report(fs::path(eval_out) / "report.txt");
      std::cout << report.rdbuf();
    } else if (*gc) {
      const GradCheckRun run = cmd_gradcheck(cfg, gc_tol, gc_samples);
      for (const auto& s : run.per_loss) {
        std::printf("%-12s samples=%zu max_rel_error=%.3e %s\n", to_string(s.kind), s.samples, s.max_rel_error,
                    s.passed ? "ok" : "FAILED");
      }
      return run.passed ? 0 : 3;
    } else if (*curve) {
      auto in = io::detail::open_in(curve_csv);
      const auto points = io::read_purity_curve(in);
      print_ascii_curve(points);
      if (!curve_svg.empty()) {
        auto os = io::detail::open_out(curve_svg);
        write_purity_svg(os, points);
      }
    }
  } catch (const StageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
