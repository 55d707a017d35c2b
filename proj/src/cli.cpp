#include "parttrack/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "parttrack/checkpoint.hpp"
#include "parttrack/eval.hpp"
#include "parttrack/grad_suite.hpp"
#include "parttrack/tracking.hpp"
#include "parttrack/training.hpp"

namespace parttrack {
namespace fs = std::filesystem;

namespace {

fs::path output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return env && *env ? fs::path(env) : fs::path("runs");
}

fs::path out_dir_or(const std::string& flag, const char* sub) { return flag.empty() ? output_root() / sub : fs::path(flag); }

void apply_overrides(Config& cfg, const std::vector<std::string>& sets) {
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
}

struct TrainArgs {
  std::string config, manifest, out;
  std::vector<std::string> ablations, sets;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  Config cfg = load_config(a.config);
  fs::path manifest = cfg.train.manifest;
  if (!manifest.empty() && manifest.is_relative()) manifest = fs::path(a.config).parent_path() / manifest;
  apply_overrides(cfg, a.sets);
  for (const auto& ab : a.ablations) {
    if (ab == "no_attention_loss") cfg.train.no_attention_loss = true;
    else if (ab == "no_updater") cfg.train.no_updater = true;
    else throw ConfigError("unknown ablation '" + ab + "'");
  }
  if (a.seed) cfg.train.seed = *a.seed;
  if (!a.manifest.empty()) manifest = a.manifest;
  if (manifest.empty()) throw ConfigError("no training manifest (set manifest= in the config or pass --manifest)");
  cfg.train.manifest = manifest.string();
  cfg.validate();

  const auto dataset = load_manifest(manifest);
  if (dataset.empty()) throw DataError("manifest " + manifest.string() + " lists no sequences");
  const fs::path dir = out_dir_or(a.out, "train");
  fs::create_directories(dir);
  save_config(dir / "config.txt", cfg);

  const auto total = static_cast<std::uint64_t>(cfg.train.epochs) * cfg.train.steps_per_epoch;
  const auto every = std::max<std::uint64_t>(1, total / 20);
  const auto run = run_training(cfg, dataset, dir, [&](const StepResult& r, std::uint64_t step) {
    if (step % every == 0 || step == total || r.aborted) {
      out << "step " << step << "/" << total << " total=" << r.report.total << (r.aborted ? " (aborted)" : "") << "\n";
    }
  });
  out << "checkpoint: " << run.final_checkpoint.string() << "\n";
  return kExitOk;
}

int cmd_track(const std::string& ckpt_path, const std::string& seq_dir, bool overlay, const std::string& out_flag,
              std::ostream& out) {
  const auto ckpt = load_checkpoint(ckpt_path);
  const auto seq = load_sequence(seq_dir);
  const fs::path dir = out_dir_or(out_flag, "track");
  fs::create_directories(dir);
  save_config(dir / "config.txt", ckpt.config);

  auto params = std::make_shared<const ModelParams<double>>(ckpt.params);
  const auto results = track_sequence(seq, params, TrackerOptions::from(ckpt.config));
  const fs::path result_file = dir / (seq.name + ".txt");
  write_boxes(result_file, boxes_of(results));
  if (overlay) {
    const fs::path odir = dir / "overlay" / seq.name;
    fs::create_directories(odir);
    for (std::size_t t = 0; t < results.size(); ++t) {
      char name[32];
      std::snprintf(name, sizeof name, "%08zu.ppm", t + 1);
      write_ppm(odir / name, draw_overlay(seq.frames[t], results[t].box, results[t].parts));
    }
  }
  std::size_t coasted = 0;
  for (const auto& r : results) coasted += r.coasted;
  out << "tracked " << results.size() << " frames (" << coasted << " coasted) -> " << result_file.string() << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& results, const std::string& manifest, const std::string& out_flag, std::ostream& out) {
  const auto report = evaluate_results(results, manifest);
  const fs::path dir = out_dir_or(out_flag, "eval");
  write_report(dir, report);
  std::ofstream(dir / "inputs.txt") << "results=" << fs::absolute(results).string() << "\n"
                                    << "manifest=" << fs::absolute(manifest).string() << "\n";
  char line[256];
  std::snprintf(line, sizeof line, "AO=%.4f SR50=%.4f SR75=%.4f AUC=%.4f P20=%.4f frames=%zu\n", report.metrics.ao,
                report.metrics.sr50, report.metrics.sr75, report.success.auc, report.precision.at20, report.frames);
  out << line;
  return kExitOk;
}

int cmd_gradcheck(bool toy, int trials, std::uint64_t seed, std::ostream& out) {
  bool ok = true;
  char line[160];
  for (const auto& e : primitive_grad_suite(trials, seed)) {
    const bool pass = e.max_error < 1e-5;
    ok = ok && pass;
    std::snprintf(line, sizeof line, "%-22s trials=%d max_rel_err=%.3e %s\n", e.name.c_str(), e.trials, e.max_error,
                  pass ? "ok" : "FAIL");
    out << line;
  }
  if (toy) {
    const double err = toy_total_loss_grad_check(seed);
    const bool pass = err < 1e-4;
    ok = ok && pass;
    std::snprintf(line, sizeof line, "%-22s max_rel_err=%.3e %s\n", "toy_total_loss", err, pass ? "ok" : "FAIL");
    out << line;
  }
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_synth(const std::string& config, const std::string& out_flag, std::ostream& out) {
  const auto sc = load_synth_config(config);
  const fs::path dir = out_dir_or(out_flag, "synth");
  fs::create_directories(dir);
  std::ofstream(dir / "synth_config.txt") << to_text(sc);
  std::vector<fs::path> dirs;
  for (const auto& seq : gen_synthetic_set(sc)) {
    save_sequence(dir / seq.name, seq);
    dirs.push_back(dir / seq.name);
  }
  write_manifest(dir / "manifest.txt", dirs);
  out << "wrote " << dirs.size() << " sequences; manifest " << (dir / "manifest.txt").string() << "\n";
  return kExitOk;
}

int cmd_overlay(const std::string& seq_dir, const std::string& results, const std::string& out_flag, std::ostream& out) {
  const auto seq = load_sequence(seq_dir);
  const auto boxes = read_boxes(results);
  if (boxes.size() != seq.size()) {
    throw DataError("result file has " + std::to_string(boxes.size()) + " lines for " + std::to_string(seq.size()) +
                    " frames");
  }
  const fs::path dir = out_dir_or(out_flag, "overlay") / seq.name;
  fs::create_directories(dir);
  for (std::size_t t = 0; t < boxes.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "%08zu.ppm", t + 1);
    write_ppm(dir / name, draw_overlay(seq.frames[t], boxes[t], {}));
  }
  out << "wrote " << boxes.size() << " overlays to " << dir.string() << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Part-based transformer tracker"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train a model on a sequence manifest");
  c_train->add_option("--config", train.config, "Config file (key=value)")->required();
  c_train->add_option("--ablation", train.ablations, "no_attention_loss or no_updater (repeatable)");
  c_train->add_option("--seed", train.seed, "Override the training seed");
  c_train->add_option("--manifest", train.manifest, "Training manifest (overrides the config)");
  c_train->add_option("--set", train.sets, "Override one config key, key=value (repeatable)");
  c_train->add_option("--out", train.out, "Output directory");

  std::string ckpt, seq, track_out;
  bool overlay = false;
  auto* c_track = app.add_subcommand("track", "Track one sequence");
  c_track->add_option("--ckpt", ckpt, "Checkpoint file")->required();
  c_track->add_option("--seq", seq, "Sequence directory")->required();
  c_track->add_flag("--overlay", overlay, "Also write frames with the box and part centers drawn");
  c_track->add_option("--out", track_out, "Output directory");

  std::string results, manifest, eval_out;
  auto* c_eval = app.add_subcommand("eval", "Score result files against ground truth");
  c_eval->add_option("--results", results, "Directory of <sequence>.txt result files")->required();
  c_eval->add_option("--manifest", manifest, "Sequence manifest")->required();
  c_eval->add_option("--out", eval_out, "Output directory");

  bool toy = false;
  int trials = 100;
  std::uint64_t gc_seed = 7;
  auto* c_grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  c_grad->add_flag("--toy", toy, "Also check the full loss of a toy network");
  c_grad->add_option("--trials", trials, "Random trials per primitive");
  c_grad->add_option("--seed", gc_seed, "Seed");

  std::string synth_config, synth_out;
  auto* c_synth = app.add_subcommand("synth", "Generate synthetic sequences");
  c_synth->add_option("--config", synth_config, "Synthetic data config (key=value)")->required();
  c_synth->add_option("--out", synth_out, "Output directory");

  std::string ov_seq, ov_results, ov_out;
  auto* c_overlay = app.add_subcommand("overlay", "Draw result boxes onto a sequence");
  c_overlay->add_option("--seq", ov_seq, "Sequence directory")->required();
  c_overlay->add_option("--results", ov_results, "Result file")->required();
  c_overlay->add_option("--out", ov_out, "Output directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*c_train) return cmd_train(train, out);
    if (*c_track) return cmd_track(ckpt, seq, overlay, track_out, out);
    if (*c_eval) return cmd_eval(results, manifest, eval_out, out);
    if (*c_grad) return cmd_gradcheck(toy, trials, gc_seed, out);
    if (*c_synth) return cmd_synth(synth_config, synth_out, out);
    if (*c_overlay) return cmd_overlay(ov_seq, ov_results, ov_out, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const TrackingError& e) {
    err << "tracking error: " << e.what() << "\n";
    return kExitTracking;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace parttrack
