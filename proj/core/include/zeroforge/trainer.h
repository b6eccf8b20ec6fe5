#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zeroforge/config.h"
#include "zeroforge/encoder.h"
#include "zeroforge/generator.h"
#include "zeroforge/objectives.h"
#include "zeroforge/optimizer.h"
#include "zeroforge/renderer.h"

namespace zeroforge {

// Text queries and their sampling weights p(t). Empty weights mean uniform.
struct QuerySet {
  std::vector<std::string> prompts;
  std::vector<double> weights;

  // Non-empty, unique prompts, weights nonnegative and summing to 1.
  void Validate() const;
  bool uniform() const;
  int size() const { return static_cast<int>(prompts.size()); }
  // Weight of prompt i (1/Q when uniform).
  double weight(int i) const;
};

// One prompt per line. A line may carry a weight after a tab:
// "a round table\t0.25". Blank lines and '#' comments are skipped. Weights,
// when present on any line, must be present on all and are normalized.
QuerySet ParseQueries(const std::string& text, const std::string& source_name = "<queries>");
QuerySet LoadQueries(const std::filesystem::path& path);
std::string FormatQueries(const QuerySet& queries);

struct RunRecord {
  long iteration = 0;
  LossBreakdown loss;
  double wall_time = 0.0;  // seconds since the start of the run
  std::optional<std::string> checkpoint_path;
};

nlohmann::json ToJson(const RunRecord& record);
RunRecord RunRecordFromJson(const nlohmann::json& j);
std::vector<RunRecord> ReadRunLog(const std::filesystem::path& path);

// Fresh or imported generator for a run, with ZeroConv wrapping and flow
// trainability applied. For pretrained init the archive decides the
// architecture; its condition width must match the encoder.
std::unique_ptr<Generator> BuildGenerator(const RunConfig& config, int embedding_width);

struct TrainResult {
  std::vector<RunRecord> records;
  std::filesystem::path final_checkpoint;
  uint64_t encoder_checksum_before = 0, encoder_checksum_after = 0;
  // Every generator parameter that is not trainable in this run.
  uint64_t frozen_checksum_before = 0, frozen_checksum_after = 0;
};

// The adaptation loop. Each Step draws the batch, runs
// flow inverse -> decoder -> soft binarization -> render -> resize -> image
// encoder, evaluates the total loss, backpropagates into the trainable
// parameters and takes one Adam step.
class Trainer {
 public:
  Trainer(RunConfig config, QuerySet queries, const VisionLanguageEncoder& encoder, const RendererPlugin& renderer,
          std::unique_ptr<Generator> generator);

  // Runs update `iteration` (0-based). The loss is measured before the update.
  // Throws TrainingAborted on a non-finite loss; parameters are left untouched.
  RunRecord Step(long iteration);

  // Full run. When run_dir is non-empty it receives config.snapshot,
  // queries.txt, checkpoints/iter-<n> and log.jsonl; iter-0 is the initial
  // state and iter-<iterations> the final one.
  TrainResult Run(const std::filesystem::path& run_dir);

  // Called after every record is produced (progress reporting).
  std::function<void(const RunRecord&)> on_record;

  Generator& generator() { return *generator_; }
  const RunConfig& config() const { return config_; }
  const EmbeddingBatch& text_embeddings() const { return text_; }
  nlohmann::json CheckpointMetadata(long iteration) const;

 private:
  RunConfig config_;
  QuerySet queries_;
  const VisionLanguageEncoder& encoder_;
  const RendererPlugin& renderer_;
  std::unique_ptr<Generator> generator_;
  EmbeddingBatch text_;
  std::unique_ptr<Adam> adam_;
};

// A checkpoint together with the run settings stored alongside it.
struct LoadedCheckpoint {
  std::unique_ptr<Generator> generator;
  RunConfig config;        // defaults when the archive has no snapshot
  bool has_config = false;
  long iteration = 0;
};

LoadedCheckpoint LoadCheckpoint(const std::filesystem::path& path, const RunConfig& fallback = RunConfig{});

// Raw occupancy for one prompt (soft, before any binarization).
VoxelGrid GenerateOccupancy(const Generator& generator, const VisionLanguageEncoder& encoder, const std::string& prompt,
                            NoiseMode mode, uint64_t seed);
// Hard-binarized at gamma.
VoxelGrid GenerateShape(const Generator& generator, const VisionLanguageEncoder& encoder, const std::string& prompt,
                        NoiseMode mode, uint64_t seed, double gamma);

// Newest checkpoint (largest n) in <run_dir>/checkpoints. Throws ConfigError
// when there is none.
std::filesystem::path LatestCheckpoint(const std::filesystem::path& run_dir);

}  // namespace zeroforge
