#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "zeroforge/binarization.h"
#include "zeroforge/decoder.h"
#include "zeroforge/encoder.h"
#include "zeroforge/flow.h"
#include "zeroforge/generator.h"
#include "zeroforge/objectives.h"
#include "zeroforge/renderer.h"

namespace zeroforge {

enum class InitMode { kPretrainedArchive, kRandom };
// kAllPrompts: every prompt each iteration, rendered from views_per_query poses.
// kIid: batch_multiplier * Q prompts drawn i.i.d. from the query weights.
enum class BatchMode { kAllPrompts, kIid };

struct TrainConfig {
  long iterations = 15000;
  double lr = 1e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_multiplier = 3;
  uint64_t seed = 0;
  long checkpoint_every = 1000;
  bool zeroconv = false;
  bool finetune_flow = true;
  InitMode init = InitMode::kPretrainedArchive;
  std::string archive;
  NoiseMode noise_mode = NoiseMode::kGaussian;
  BatchMode batch_mode = BatchMode::kAllPrompts;

  void Validate() const;
};

// Every tunable of a run. Keys of the flat key-value file:
//   encoder.{kind,seed,embedding_width,image_resolution,checkpoint,endpoint}
//   flow.{num_coupling_blocks,hidden_width,latent_dim}
//   decoder.{num_blocks,resolution,channels}
//   render.{image_size,steps_per_ray,background,density_scale,projection,plugin,plugin_checkpoint}
//   loss.{lambda_c,tau,views_per_query}
//   binarize.{beta,gamma}
//   train.{iterations,lr,adam_beta1,adam_beta2,adam_eps,batch_multiplier,seed,
//          checkpoint_every,zeroconv,finetune_flow,init,archive,noise_mode,batch_mode}
struct RunConfig {
  EncoderOptions encoder;
  FlowConfig flow;
  DecoderConfig decoder;
  RenderConfig render;
  std::string render_plugin = "builtin";
  std::string render_plugin_checkpoint;
  ObjectiveParams loss;
  BinarizationParams binarize;
  TrainConfig train;

  void Validate() const;
};

// Parses `key = value` lines on top of `base`. Blank lines and lines starting
// with '#' are ignored. Errors name the source, line and key.
RunConfig ParseRunConfig(std::string_view text, const std::string& source_name = "<config>",
                         RunConfig base = RunConfig{});
RunConfig LoadRunConfig(const std::filesystem::path& path, RunConfig base = RunConfig{});
// Sets a single key (same validation as the file parser).
void SetConfigValue(RunConfig& config, const std::string& key, const std::string& value);

// Every key with its effective value, one per line, in ConfigKeys() order.
// Parsing the snapshot reproduces the same configuration.
std::string SnapshotRunConfig(const RunConfig& config);
std::vector<std::string> ConfigKeys();
bool SameConfig(const RunConfig& a, const RunConfig& b);

// Named ablation settings: beta100, beta200, beta300 and
// contrast-l<0.01|0.1>-t<30|50>.
void ApplyPreset(RunConfig& config, const std::string& preset);
std::vector<std::string> PresetNames();

std::string ToString(InitMode m);
std::string ToString(BatchMode m);

}  // namespace zeroforge
