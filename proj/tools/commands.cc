#include "commands.h"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "zeroforge/binarization.h"
#include "zeroforge/config.h"
#include "zeroforge/errors.h"
#include "zeroforge/evaluation.h"
#include "zeroforge/png_io.h"
#include "zeroforge/renderer.h"
#include "zeroforge/trainer.h"
#include "zeroforge/voxel_file.h"

namespace zeroforge::cli {

namespace fs = std::filesystem;

namespace {

void ApplyOverrides(const GlobalOptions& g, RunConfig& cfg) {
  for (const auto& p : g.presets) ApplyPreset(cfg, p);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got \"" + kv + "\"");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(' ');
      const auto e = s.find_last_not_of(' ');
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    SetConfigValue(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
}

RunConfig ResolveConfig(const GlobalOptions& g, RunConfig base = RunConfig{}) {
  RunConfig cfg = g.config_path.empty() ? std::move(base) : LoadRunConfig(g.config_path, std::move(base));
  ApplyOverrides(g, cfg);
  return cfg;
}

fs::path ResolveCheckpoint(const std::string& given) {
  std::string where = given;
  if (where.empty()) {
    const char* env = std::getenv(kCheckpointDirEnv);
    if (!env || !*env) throw ConfigError(std::string("no checkpoint given and ") + kCheckpointDirEnv + " is not set");
    where = env;
  }
  const fs::path p(where);
  if (fs::is_regular_file(p)) return p;
  if (fs::is_directory(p / "checkpoints")) return LatestCheckpoint(p);
  // A checkpoints/ directory itself.
  if (fs::is_directory(p)) return LatestCheckpoint(p / "..");
  throw ConfigError("checkpoint " + where + " does not exist");
}

template <typename F>
int Guard(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const TrainingAborted& e) {
    err << "error: training aborted at iteration " << e.iteration() << ": " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int CmdTrain(const GlobalOptions& g, const TrainArgs& a, std::ostream& out, std::ostream& err) {
  return Guard(err, [&] {
    RunConfig cfg = ResolveConfig(g);
    if (g.seed) cfg.train.seed = *g.seed;
    if (a.iterations) cfg.train.iterations = *a.iterations;
    cfg.Validate();
    const QuerySet queries = LoadQueries(a.queries_path);
    auto encoder = MakeEncoder(cfg.encoder);
    auto renderer = MakeRendererPlugin(cfg.render_plugin, cfg.render_plugin_checkpoint, cfg.render);
    auto generator = BuildGenerator(cfg, encoder->spec().embedding_width);
    Trainer trainer(cfg, queries, *encoder, *renderer, std::move(generator));
    const long every = std::max(1L, cfg.train.iterations / 20);
    trainer.on_record = [&](const RunRecord& r) {
      if ((r.iteration + 1) % every == 0 || r.iteration + 1 == cfg.train.iterations)
        out << "iter " << r.iteration + 1 << "/" << cfg.train.iterations << "  total " << r.loss.total << "  sim "
            << r.loss.sim << "  contrast " << r.loss.contrast << "\n";
    };
    const TrainResult res = trainer.Run(a.out_dir);
    if (res.encoder_checksum_before != res.encoder_checksum_after ||
        res.frozen_checksum_before != res.frozen_checksum_after) {
      err << "error: frozen parameters changed during training\n";
      return 4;
    }
    out << "final checkpoint: " << res.final_checkpoint.string() << "\n";
    return 0;
  });
}

int CmdGenerate(const GlobalOptions& g, const GenerateArgs& a, std::ostream& out, std::ostream& err) {
  return Guard(err, [&] {
    const fs::path ckpt_path = ResolveCheckpoint(a.checkpoint);
    RunConfig fallback = ResolveConfig(g);
    LoadedCheckpoint ckpt = LoadCheckpoint(ckpt_path, fallback);
    RunConfig cfg = ckpt.config;
    if (ckpt.has_config) ApplyOverrides(g, cfg);
    auto encoder = MakeEncoder(cfg.encoder);
    const NoiseMode mode = ParseNoiseMode(a.noise_mode);
    const uint64_t seed = g.seed.value_or(0);
    const VoxelGrid raw = GenerateOccupancy(*ckpt.generator, *encoder, a.prompt, mode, seed);
    VoxelGrid hard = BinarizeHard(raw, cfg.binarize.gamma);
    if (a.resolution) hard = ResampleNearest(hard, *a.resolution);
    if (a.soft) {
      WriteVoxelFile(a.out_path, a.resolution ? ResampleNearest(raw, *a.resolution) : raw, VoxelDtype::kF32Soft);
    } else {
      WriteVoxelFile(a.out_path, hard, VoxelDtype::kU8Binary);
    }
    if (!a.preview_path.empty()) {
      RenderConfig rc = cfg.render;
      WritePng(a.preview_path, Render(hard, CameraPose{kPreviewAzimuth, kPreviewPolar}, rc));
    }
    size_t occupied = 0;
    for (double v : hard.values) occupied += v != 0.0;
    out << "wrote " << a.out_path << " (" << hard.resolution << "^3, " << occupied << " occupied)\n";
    return 0;
  });
}

int CmdEval(const GlobalOptions& g, const EvalArgs& a, std::ostream& out, std::ostream& err) {
  return Guard(err, [&] {
    if (!fs::is_directory(a.run_dir)) throw ConfigError("run directory " + a.run_dir + " does not exist");
    EvalOptions opts;
    opts.seed = g.seed.value_or(0);
    opts.views = a.views;
    opts.noise_mode = ParseNoiseMode(a.noise_mode);
    const EvalReport report = EvaluateRun(a.run_dir, opts);
    WriteEvalReport(a.out_path, report);
    out << "r_precision " << report.r_precision << "  forced_choice " << report.forced_choice_accuracy
        << "  mean_offdiag_iou " << report.mean_offdiag_iou << "\n";
    if (!report.empty_pairs.empty())
      out << "warning: " << report.empty_pairs.size() << " pair(s) of empty shapes counted with IoU 1\n";
    return 0;
  });
}

int CmdExport(const GlobalOptions& g, const ExportArgs& a, std::ostream& out, std::ostream& err) {
  return Guard(err, [&] {
    VoxelGrid grid = ReadVoxelFile(a.in_path);
    if (a.resolution) grid = ResampleNearest(grid, *a.resolution);
    if (a.format == "u8") {
      WriteVoxelFile(a.out_path, grid.binarized ? grid : BinarizeHard(grid, a.gamma), VoxelDtype::kU8Binary);
    } else if (a.format == "f32") {
      WriteVoxelFile(a.out_path, grid, VoxelDtype::kF32Soft);
    } else if (a.format == "png") {
      const RunConfig cfg = ResolveConfig(g);
      const VoxelGrid hard = grid.binarized ? grid : BinarizeHard(grid, a.gamma);
      WritePng(a.out_path, Render(hard, CameraPose{kPreviewAzimuth, kPreviewPolar}, cfg.render));
    } else {
      throw ConfigError("export format must be one of {u8, f32, png}, got \"" + a.format + "\"");
    }
    out << "wrote " << a.out_path << "\n";
    return 0;
  });
}

int Main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Text-guided voxel shape generation"};
  app.require_subcommand(1);
  // Global options are accepted before or after the subcommand name.
  app.fallthrough();
  GlobalOptions g;
  uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Seed for training, noise and evaluation");
  app.add_option("--config", g.config_path, "Run config file (key = value lines)");
  app.add_option("--preset", g.presets, "Named setting: " + [] {
    std::string s;
    for (const auto& p : PresetNames()) s += (s.empty() ? "" : ", ") + p;
    return s;
  }());
  app.add_option("--set", g.overrides, "Override one config key, key=value");

  TrainArgs train;
  long iterations = 0;
  auto* train_cmd = app.add_subcommand("train", "Adapt a generator to a set of text queries");
  train_cmd->add_option("--queries", train.queries_path, "Prompt file, one per line")->required();
  train_cmd->add_option("--out", train.out_dir, "Run directory")->required();
  auto* iter_opt = train_cmd->add_option("--iterations", iterations, "Override train.iterations");

  GenerateArgs gen;
  int gen_res = 0;
  auto* gen_cmd = app.add_subcommand("generate", "Generate a voxel grid for a prompt");
  gen_cmd->add_option("--checkpoint", gen.checkpoint,
                      std::string("Checkpoint file or run directory (default: $") + kCheckpointDirEnv + ")");
  gen_cmd->add_option("--prompt", gen.prompt)->required();
  gen_cmd->add_option("--out", gen.out_path, "Voxel file to write")->required();
  gen_cmd->add_option("--noise", gen.noise_mode, "zero or gaussian")->capture_default_str();
  auto* gen_res_opt = gen_cmd->add_option("--resolution", gen_res, "Resample the output grid");
  gen_cmd->add_flag("--soft", gen.soft, "Store raw occupancy as f32 instead of a binary grid");
  gen_cmd->add_option("--preview", gen.preview_path, "Also write a PNG render");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate the newest checkpoint of a run");
  eval_cmd->add_option("--run", ev.run_dir)->required();
  eval_cmd->add_option("--out", ev.out_path, "Report path (JSON); the IoU table goes to <out>.iou.txt")->required();
  eval_cmd->add_option("--views", ev.views, "Views per query (default: loss.views_per_query)");
  eval_cmd->add_option("--noise", ev.noise_mode, "zero or gaussian")->capture_default_str();

  ExportArgs ex;
  int ex_res = 0;
  auto* export_cmd = app.add_subcommand("export", "Convert a voxel file or render it to PNG");
  export_cmd->add_option("--in", ex.in_path)->required();
  export_cmd->add_option("--out", ex.out_path)->required();
  export_cmd->add_option("--format", ex.format, "u8, f32 or png")->capture_default_str();
  export_cmd->add_option("--gamma", ex.gamma, "Threshold for soft grids")->capture_default_str();
  auto* ex_res_opt = export_cmd->add_option("--resolution", ex_res, "Resample before writing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  if (*seed_opt) g.seed = seed;
  if (*train_cmd) {
    if (*iter_opt) train.iterations = iterations;
    return CmdTrain(g, train, out, err);
  }
  if (*gen_cmd) {
    if (*gen_res_opt) gen.resolution = gen_res;
    return CmdGenerate(g, gen, out, err);
  }
  if (*eval_cmd) return CmdEval(g, ev, out, err);
  if (*ex_res_opt) ex.resolution = ex_res;
  return CmdExport(g, ex, out, err);
}

}  // namespace zeroforge::cli
