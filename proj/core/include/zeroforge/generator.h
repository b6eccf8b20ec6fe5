#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "zeroforge/decoder.h"
#include "zeroforge/flow.h"

namespace zeroforge {

enum class NoiseMode { kZero, kGaussian };

std::string ToString(NoiseMode mode);
NoiseMode ParseNoiseMode(const std::string& s);

// G = D o F^-1: text embedding -> latent code (through the inverse flow) ->
// occupancy grid.
class Generator {
 public:
  Generator(const FlowConfig& flow, const DecoderConfig& decoder);
  Generator(const Generator&) = delete;
  Generator& operator=(const Generator&) = delete;

  // Fresh weights. Flow sub-networks end in zero layers (identity flow); the
  // decoder head bias is set to `head_bias`.
  void InitRandom(uint64_t seed, double head_bias);

  LatentFlow& flow() { return flow_; }
  const LatentFlow& flow() const { return flow_; }
  OccupancyDecoder& decoder() { return decoder_; }
  const OccupancyDecoder& decoder() const { return decoder_; }

  // Base-space points: zeros, or N(0, I) rows drawn from the seed's noise stream.
  Matrix SampleBase(int rows, NoiseMode mode, uint64_t seed) const;
  LatentBatch SampleLatent(const EmbeddingBatch& text, NoiseMode mode, uint64_t seed) const;
  std::vector<VoxelGrid> DecodeOccupancy(const LatentBatch& z) const { return decoder_.Decode(z); }
  std::vector<VoxelGrid> Generate(const EmbeddingBatch& text, NoiseMode mode, uint64_t seed) const;

  void SetFlowTrainable(bool trainable);
  void WrapZeroConv() { decoder_.WrapZeroConv(); }

  // Flow parameters followed by decoder parameters.
  ParameterList parameters();
  void ZeroGrad();

 private:
  LatentFlow flow_;
  OccupancyDecoder decoder_;
};

}  // namespace zeroforge
