#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace zeroforge::cli {

// Options shared by every subcommand.
struct GlobalOptions {
  std::optional<uint64_t> seed;
  std::string config_path;
  std::vector<std::string> presets;
  std::vector<std::string> overrides;  // key=value
};

struct TrainArgs {
  std::string queries_path;
  std::string out_dir;
  std::optional<long> iterations;
};

struct GenerateArgs {
  std::string checkpoint;  // file or directory; empty uses ZEROFORGE_CHECKPOINT_DIR
  std::string prompt;
  std::string out_path;
  std::string noise_mode = "zero";
  std::optional<int> resolution;
  bool soft = false;
  std::string preview_path;
};

struct EvalArgs {
  std::string run_dir;
  std::string out_path;
  int views = 0;
  std::string noise_mode = "zero";
};

struct ExportArgs {
  std::string in_path;
  std::string out_path;
  std::string format = "u8";  // u8, f32 or png
  double gamma = 0.05;
  std::optional<int> resolution;
};

// Each command returns a process exit status and reports errors on `err`.
int CmdTrain(const GlobalOptions& g, const TrainArgs& a, std::ostream& out, std::ostream& err);
int CmdGenerate(const GlobalOptions& g, const GenerateArgs& a, std::ostream& out, std::ostream& err);
int CmdEval(const GlobalOptions& g, const EvalArgs& a, std::ostream& out, std::ostream& err);
int CmdExport(const GlobalOptions& g, const ExportArgs& a, std::ostream& out, std::ostream& err);

// Azimuth and polar angle of the preview camera.
inline constexpr double kPreviewAzimuth = 0.78539816339744830962;  // pi/4
inline constexpr double kPreviewPolar = 1.04719755197492100000;    // pi/3

// Environment variable naming the default checkpoint location for generate.
inline constexpr const char* kCheckpointDirEnv = "ZEROFORGE_CHECKPOINT_DIR";

// Full command-line entry point (argv[0] included).
int Main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace zeroforge::cli
