#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "zeroforge/encoder.h"
#include "zeroforge/image.h"
#include "zeroforge/trainer.h"
#include "zeroforge/voxel_grid.h"

namespace zeroforge {

struct IoUMatrix {
  std::vector<std::vector<double>> values;
  std::vector<std::string> labels;
  // (i, j), i < j, where both grids are empty and the IoU was defined as 1.
  std::vector<std::pair<int, int>> empty_pairs;

  int size() const { return static_cast<int>(values.size()); }
  // Mean over i != j; 0 for a single grid.
  double MeanOffDiagonal() const;
  // Plain-text table: header of labels, then one row per grid.
  std::string ToText() const;
};

// |a and b| / |a or b| over occupied voxels. Both empty gives 1 and sets
// *both_empty. Grids must be hard-binarized and of equal resolution.
double IoU(const VoxelGrid& a, const VoxelGrid& b, bool* both_empty = nullptr);
IoUMatrix PairwiseIoU(std::span<const VoxelGrid> grids, std::vector<std::string> labels);

// Per-query image embedding: the normalized mean of its views' embeddings.
EmbeddingBatch PooledViewEmbeddings(std::span<const EmbeddingBatch> views_per_query);

// Fraction of queries whose pooled render embedding is strictly closest to
// their own text. Ties count as misses. `correct` receives the per-query
// outcome when non-null.
double RPrecision(const EmbeddingBatch& renders, const EmbeddingBatch& texts, std::vector<bool>* correct = nullptr);
double RPrecision(const std::vector<std::vector<Image>>& renders, const QuerySet& queries,
                  const VisionLanguageEncoder& encoder, std::vector<bool>* correct = nullptr);

// Two-alternative forced choice over every ordered (query, distractor) pair.
// A pair is correct when sim(render_q, text_q) > sim(render_d, text_q); exact
// ties are settled by a fair coin from `rng`. Needs at least two queries.
struct ForcedChoiceResult {
  double accuracy = 0.0;
  std::vector<int> correct;  // per query
  std::vector<int> trials;   // per query
};
ForcedChoiceResult ForcedChoice(const EmbeddingBatch& renders, const EmbeddingBatch& texts, std::mt19937_64& rng);
ForcedChoiceResult ForcedChoice(const std::vector<std::vector<Image>>& renders, const QuerySet& queries,
                                const VisionLanguageEncoder& encoder, std::mt19937_64& rng);

struct QueryReport {
  std::string prompt;
  double matched_similarity = 0.0;  // <pooled render, own text>
  bool retrieved = false;
  int forced_choice_correct = 0;
  int forced_choice_trials = 0;
  double mean_iou_to_others = 0.0;
  bool empty = false;
};

// All rates lie in [0,1]. forced_choice_accuracy is NaN (null in JSON) for a
// single query. Totals are recomputable from the per-query rows:
//   r_precision = mean(retrieved)
//   forced_choice_accuracy = sum(correct) / sum(trials)
//   mean_offdiag_iou = mean(mean_iou_to_others)
struct EvalReport {
  double r_precision = 0.0;
  double forced_choice_accuracy = 0.0;
  double mean_offdiag_iou = 0.0;
  long checkpoint_iteration = 0;
  std::string checkpoint;
  std::vector<std::pair<int, int>> empty_pairs;
  std::vector<QueryReport> per_query;
  IoUMatrix iou;

  nlohmann::json ToJson() const;
};

struct EvalOptions {
  uint64_t seed = 0;
  int views = 0;  // 0 uses loss.views_per_query of the run
  NoiseMode noise_mode = NoiseMode::kZero;
};

// Evaluates the generator on the queries: hard-binarized shapes, IoU matrix,
// views rendered from poses of the evaluation stream, R-precision and forced
// choice on the pooled render embeddings.
EvalReport Evaluate(const Generator& generator, const QuerySet& queries, const VisionLanguageEncoder& encoder,
                    const RendererPlugin& renderer, double gamma, const EvalOptions& options);

// Loads the newest checkpoint in run_dir together with its config and
// queries and evaluates it.
EvalReport EvaluateRun(const std::filesystem::path& run_dir, const EvalOptions& options);

// Writes the report as JSON to `path` and the IoU table to `path`.iou.txt.
void WriteEvalReport(const std::filesystem::path& path, const EvalReport& report);

}  // namespace zeroforge
