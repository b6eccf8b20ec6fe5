#include "zeroforge/decoder.h"

#include "zeroforge/errors.h"

namespace zeroforge {

void DecoderConfig::Validate() const {
  if (num_blocks < 1) throw ConfigError("decoder.num_blocks must be >= 1");
  if (channels < 1) throw ConfigError("decoder.channels must be >= 1");
  if (latent_dim < 1) throw ConfigError("decoder latent_dim must be >= 1");
  const int factor = 1 << num_blocks;
  const int base = resolution / factor;
  if (resolution < factor || resolution % factor != 0 || (base & (base - 1)) != 0) {
    throw ConfigError("decoder.resolution " + std::to_string(resolution) +
                      " is not a power-of-two multiple of the upsampling factor " + std::to_string(factor));
  }
}

// ---------------------------------------------------------------------------
// ResBlock

ResBlock::ResBlock(const std::string& prefix, int channels)
    : conv0_(prefix + ".conv0", channels, channels, 3), conv1_(prefix + ".conv1", channels, channels, 3) {}

void ResBlock::Init(std::mt19937_64& rng) {
  conv0_.InitUniform(rng);
  conv1_.InitUniform(rng);
}

Volume ResBlock::Forward(const Volume& x, Tape* tape) const {
  Volume up = Upsample2(x);
  Volume h0 = conv0_.Forward(Relu(up));
  Volume h1 = Relu(h0);
  Volume y = conv1_.Forward(h1);
  AddInPlace(y, up);
  if (tape) {
    tape->up = std::move(up);
    tape->h0 = std::move(h0);
    tape->h1 = std::move(h1);
  }
  return y;
}

Volume ResBlock::Backward(const Tape& tape, const Volume& grad_out, int in_size) {
  Volume g1 = conv1_.Backward(tape.h1, grad_out);
  Volume g0 = ReluBackward(tape.h0, g1);
  Volume ga = conv0_.Backward(Relu(tape.up), g0);
  Volume gup = ReluBackward(tape.up, ga);
  AddInPlace(gup, grad_out);
  return Upsample2Backward(gup, in_size);
}

void ResBlock::CollectParameters(ParameterList& out) {
  conv0_.CollectParameters(out);
  conv1_.CollectParameters(out);
}

void ResBlock::SetTrainable(bool t) {
  conv0_.SetTrainable(t);
  conv1_.SetTrainable(t);
}

void ResBlock::CopyValuesFrom(const ResBlock& other) {
  conv0_.weight.value = other.conv0_.weight.value;
  conv0_.bias.value = other.conv0_.bias.value;
  conv1_.weight.value = other.conv1_.weight.value;
  conv1_.bias.value = other.conv1_.bias.value;
}

// ---------------------------------------------------------------------------
// OccupancyDecoder

OccupancyDecoder::OccupancyDecoder(const DecoderConfig& config) : config_(config) {
  config_.Validate();
  const int c = config_.channels, b = config_.base_size();
  proj_ = Linear("decoder.proj", config_.latent_dim, c * b * b * b);
  stages_.resize(config_.num_blocks);
  for (int j = 0; j < config_.num_blocks; ++j) stages_[j].base = ResBlock("decoder.blocks." + std::to_string(j), c);
  head_ = Conv3d("decoder.head", c, 1, 1);
  if (config.zeroconv_enabled) {
    config_.zeroconv_enabled = false;
    WrapZeroConv();
  }
}

void OccupancyDecoder::Init(std::mt19937_64& rng, double head_bias) {
  proj_.InitUniform(rng);
  for (auto& s : stages_) {
    s.base.Init(rng);
    if (s.adapter) {
      s.adapter->trainable.CopyValuesFrom(s.base);
      s.adapter->zero_conv.InitZero();
    }
  }
  head_.InitUniform(rng);
  head_.bias.value[0] = head_bias;
}

VoxelGrid OccupancyDecoder::DecodeOne(const Eigen::RowVectorXd& z, Tape* tape) const {
  if (z.size() != config_.latent_dim)
    throw ShapeError("latent code has " + std::to_string(z.size()) + " entries, decoder expects " +
                     std::to_string(config_.latent_dim));
  const int c = config_.channels;
  Matrix zm = z;
  Matrix p = proj_.Forward(zm);
  Volume x(c, config_.base_size());
  std::copy(p.data(), p.data() + p.size(), x.data.begin());
  if (tape) {
    tape->z = zm;
    tape->block_inputs.clear();
    tape->blocks.assign(stages_.size(), {});
  }
  for (size_t j = 0; j < stages_.size(); ++j) {
    const Stage& s = stages_[j];
    BlockTape* bt = tape ? &tape->blocks[j] : nullptr;
    Volume y = s.base.Forward(x, bt ? &bt->base : nullptr);
    if (s.adapter) {
      Volume a = s.adapter->trainable.Forward(x, bt ? &bt->adapted : nullptr);
      AddInPlace(y, s.adapter->zero_conv.Forward(a));
      if (bt) bt->adapted_out = std::move(a);
    }
    if (tape) tape->block_inputs.push_back(std::move(x));
    x = std::move(y);
  }
  Volume out = head_.Forward(Relu(x));
  if (tape) tape->head_pre = std::move(x);
  VoxelGrid grid(config_.resolution);
  grid.values = std::move(out.data);
  return grid;
}

std::vector<VoxelGrid> OccupancyDecoder::Decode(const LatentBatch& z, std::vector<Tape>* tapes) const {
  if (z.cols() != config_.latent_dim)
    throw ShapeError("latent width " + std::to_string(z.cols()) + " does not match decoder latent_dim " +
                     std::to_string(config_.latent_dim));
  std::vector<VoxelGrid> out;
  out.reserve(z.rows());
  if (tapes) tapes->assign(z.rows(), {});
  for (Eigen::Index i = 0; i < z.rows(); ++i) out.push_back(DecodeOne(z.row(i), tapes ? &(*tapes)[i] : nullptr));
  return out;
}

Eigen::RowVectorXd OccupancyDecoder::Backward(const Tape& tape, const VoxelGrid& grad_out) {
  if (grad_out.resolution != config_.resolution) throw ShapeError("decoder gradient has the wrong resolution");
  Volume g(1, config_.resolution);
  g.data = grad_out.values;
  Volume gx = head_.Backward(Relu(tape.head_pre), g);
  gx = ReluBackward(tape.head_pre, gx);
  for (size_t j = stages_.size(); j-- > 0;) {
    Stage& s = stages_[j];
    const int in_size = tape.block_inputs[j].size;
    Volume gin = s.base.Backward(tape.blocks[j].base, gx, in_size);
    if (s.adapter) {
      Volume ga = s.adapter->zero_conv.Backward(tape.blocks[j].adapted_out, gx);
      AddInPlace(gin, s.adapter->trainable.Backward(tape.blocks[j].adapted, ga, in_size));
    }
    gx = std::move(gin);
  }
  Matrix gp = Eigen::Map<const Matrix>(gx.data.data(), 1, static_cast<Eigen::Index>(gx.data.size()));
  Matrix gz = proj_.Backward(tape.z, gp);
  return gz.row(0);
}

void OccupancyDecoder::WrapZeroConv() {
  if (config_.zeroconv_enabled) throw ConfigError("decoder is already wrapped with ZeroConv adapters");
  const int c = config_.channels;
  for (size_t j = 0; j < stages_.size(); ++j) {
    auto& s = stages_[j];
    const std::string prefix = "decoder.blocks." + std::to_string(j);
    s.adapter = std::make_unique<Adapter>(Adapter{ResBlock(prefix + ".trainable", c), Conv3d(prefix + ".zero_conv", c, c, 1)});
    s.adapter->trainable.CopyValuesFrom(s.base);
    s.adapter->zero_conv.InitZero();
    s.base.SetTrainable(false);
  }
  proj_.weight.trainable = proj_.bias.trainable = false;
  head_.SetTrainable(false);
  config_.zeroconv_enabled = true;
}

ParameterList OccupancyDecoder::base_parameters() {
  ParameterList out;
  proj_.CollectParameters(out);
  for (auto& s : stages_) s.base.CollectParameters(out);
  head_.CollectParameters(out);
  return out;
}

ParameterList OccupancyDecoder::adapter_parameters() {
  ParameterList out;
  for (auto& s : stages_) {
    if (!s.adapter) continue;
    s.adapter->trainable.CollectParameters(out);
    s.adapter->zero_conv.CollectParameters(out);
  }
  return out;
}

ParameterList OccupancyDecoder::zero_conv_parameters() {
  ParameterList out;
  for (auto& s : stages_)
    if (s.adapter) s.adapter->zero_conv.CollectParameters(out);
  return out;
}

ParameterList OccupancyDecoder::parameters() {
  ParameterList out = base_parameters();
  ParameterList a = adapter_parameters();
  out.insert(out.end(), a.begin(), a.end());
  return out;
}

}  // namespace zeroforge
