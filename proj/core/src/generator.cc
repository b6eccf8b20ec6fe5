#include "zeroforge/generator.h"

#include "zeroforge/errors.h"
#include "zeroforge/rng.h"

namespace zeroforge {

std::string ToString(NoiseMode mode) { return mode == NoiseMode::kZero ? "zero" : "gaussian"; }

NoiseMode ParseNoiseMode(const std::string& s) {
  if (s == "zero") return NoiseMode::kZero;
  if (s == "gaussian") return NoiseMode::kGaussian;
  throw ConfigError("noise mode must be one of {zero, gaussian}, got \"" + s + "\"");
}

namespace {

DecoderConfig WithLatent(DecoderConfig d, int latent_dim) {
  d.latent_dim = latent_dim;
  return d;
}

}  // namespace

Generator::Generator(const FlowConfig& flow, const DecoderConfig& decoder)
    : flow_(flow), decoder_(WithLatent(decoder, flow.latent_dim)) {}

void Generator::InitRandom(uint64_t seed, double head_bias) {
  auto rng = MakeStream(seed, 0, Stream::kInit);
  flow_.Init(rng);
  decoder_.Init(rng, head_bias);
}

Matrix Generator::SampleBase(int rows, NoiseMode mode, uint64_t seed) const {
  Matrix u = Matrix::Zero(rows, flow_.config().latent_dim);
  if (mode == NoiseMode::kGaussian) {
    auto rng = MakeStream(seed, 0, Stream::kNoise);
    for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = StandardNormal(rng);
  }
  return u;
}

LatentBatch Generator::SampleLatent(const EmbeddingBatch& text, NoiseMode mode, uint64_t seed) const {
  return flow_.Inverse(SampleBase(text.rows(), mode, seed), text);
}

std::vector<VoxelGrid> Generator::Generate(const EmbeddingBatch& text, NoiseMode mode, uint64_t seed) const {
  return decoder_.Decode(SampleLatent(text, mode, seed));
}

void Generator::SetFlowTrainable(bool trainable) {
  for (Parameter* p : flow_.parameters()) p->trainable = trainable;
}

ParameterList Generator::parameters() {
  ParameterList out = flow_.parameters();
  ParameterList d = decoder_.parameters();
  out.insert(out.end(), d.begin(), d.end());
  return out;
}

void Generator::ZeroGrad() {
  for (Parameter* p : parameters()) p->ZeroGrad();
}

}  // namespace zeroforge
