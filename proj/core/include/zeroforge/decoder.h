#pragma once

#include <memory>
#include <random>
#include <vector>

#include "zeroforge/flow.h"
#include "zeroforge/nn.h"
#include "zeroforge/voxel_grid.h"

namespace zeroforge {

struct DecoderConfig {
  int num_blocks = 5;
  int resolution = 128;
  int channels = 32;
  int latent_dim = 128;
  bool zeroconv_enabled = false;

  // Edge length of the volume produced by the latent projection.
  int base_size() const { return resolution >> num_blocks; }
  void Validate() const;
};

// Residual upsampling block: up = upsample2(x); y = up + conv1(relu(conv0(relu(up)))).
class ResBlock {
 public:
  struct Tape {
    Volume up, h0, h1;  // h0 = conv0(relu(up)), h1 = relu(h0)
  };

  ResBlock() = default;
  ResBlock(const std::string& prefix, int channels);

  void Init(std::mt19937_64& rng);
  Volume Forward(const Volume& x, Tape* tape) const;
  Volume Backward(const Tape& tape, const Volume& grad_out, int in_size);
  void CollectParameters(ParameterList& out);
  void SetTrainable(bool t);
  // Copies parameter values (not names) from another block.
  void CopyValuesFrom(const ResBlock& other);

 private:
  Conv3d conv0_;
  Conv3d conv1_;
};

// Occupancy decoder D: latent -> C x b^3 projection, num_blocks residual
// upsampling blocks, then a 1x1x1 head emitting one value per voxel.
//
// WrapZeroConv replaces every block with frozen(x) + zero_conv(trainable(x)),
// where `trainable` starts as a copy of the frozen block and zero_conv is a
// zero-initialized 1x1x1 convolution; projection and head are frozen too.
class OccupancyDecoder {
 public:
  struct BlockTape {
    ResBlock::Tape base, adapted;
    Volume adapted_out;
  };
  struct Tape {
    Matrix z;
    std::vector<Volume> block_inputs;
    std::vector<BlockTape> blocks;
    Volume head_pre;  // input of the final ReLU
  };

  explicit OccupancyDecoder(const DecoderConfig& config);
  OccupancyDecoder(const OccupancyDecoder&) = delete;
  OccupancyDecoder& operator=(const OccupancyDecoder&) = delete;

  const DecoderConfig& config() const { return config_; }
  void Init(std::mt19937_64& rng, double head_bias);

  // One grid per row of z (binarized = false). A tape is recorded per row
  // when `tapes` is non-null.
  std::vector<VoxelGrid> Decode(const LatentBatch& z, std::vector<Tape>* tapes = nullptr) const;
  VoxelGrid DecodeOne(const Eigen::RowVectorXd& z, Tape* tape) const;
  // Accumulates parameter gradients; returns the gradient w.r.t. z (one row).
  Eigen::RowVectorXd Backward(const Tape& tape, const VoxelGrid& grad_out);

  // Throws ConfigError when already wrapped.
  void WrapZeroConv();
  bool wrapped() const { return config_.zeroconv_enabled; }

  ParameterList parameters();
  // Parameters of the blocks, projection and head that exist before wrapping.
  ParameterList base_parameters();
  // Parameters added by WrapZeroConv (empty when not wrapped).
  ParameterList adapter_parameters();
  // zero_conv weights and biases only.
  ParameterList zero_conv_parameters();

 private:
  struct Adapter {
    ResBlock trainable;
    Conv3d zero_conv;
  };
  struct Stage {
    ResBlock base;
    std::unique_ptr<Adapter> adapter;
  };

  DecoderConfig config_;
  Linear proj_;
  std::vector<Stage> stages_;
  Conv3d head_;
};

}  // namespace zeroforge
