#include "zeroforge/flow.h"

#include "zeroforge/errors.h"

namespace zeroforge {

void FlowConfig::Validate() const {
  if (num_coupling_blocks < 1) throw ConfigError("flow.num_coupling_blocks must be >= 1");
  if (hidden_width < 1) throw ConfigError("flow.hidden_width must be >= 1");
  if (latent_dim < 2 || latent_dim % 2 != 0) throw ConfigError("flow.latent_dim must be even and >= 2");
  if (condition_dim < 1) throw ConfigError("flow condition dimension must be >= 1");
}

CouplingBlock::CouplingBlock(const std::string& prefix, const FlowConfig& config, bool condition_on_first_half)
    : latent_dim_(config.latent_dim),
      mask_(Eigen::RowVectorXd::Zero(config.latent_dim)),
      scale_net_(prefix + ".scale_net", config.latent_dim + config.condition_dim, config.hidden_width,
                 config.latent_dim, Activation::kTanh),
      translate_net_(prefix + ".translate_net", config.latent_dim + config.condition_dim, config.hidden_width,
                     config.latent_dim, Activation::kRelu) {
  const int half = latent_dim_ / 2;
  for (int i = 0; i < latent_dim_; ++i) mask_[i] = (i < half) == condition_on_first_half ? 1.0 : 0.0;
}

void CouplingBlock::Init(std::mt19937_64& rng) {
  scale_net_.InitUniform(rng, /*zero_last=*/true);
  translate_net_.InitUniform(rng, /*zero_last=*/true);
}

Matrix CouplingBlock::NetInput(const Matrix& x, const Matrix& cond) const {
  Matrix in(x.rows(), latent_dim_ + cond.cols());
  in.leftCols(latent_dim_) = x.array().rowwise() * mask_.array();
  in.rightCols(cond.cols()) = cond;
  return in;
}

Matrix CouplingBlock::Forward(const Matrix& z, const Matrix& cond, Eigen::VectorXd& logdet) const {
  Matrix in = NetInput(z, cond);
  const Eigen::RowVectorXd inv = Eigen::RowVectorXd::Ones(latent_dim_) - mask_;
  Matrix log_s = scale_net_.Forward(in, nullptr).array().rowwise() * inv.array();
  Matrix t = translate_net_.Forward(in, nullptr).array().rowwise() * inv.array();
  logdet += log_s.rowwise().sum();
  return (z.array() * log_s.array().exp() + t.array()).matrix();
}

Matrix CouplingBlock::Inverse(const Matrix& u, const Matrix& cond, Tape* tape) const {
  Matrix in = NetInput(u, cond);
  const Eigen::RowVectorXd inv = Eigen::RowVectorXd::Ones(latent_dim_) - mask_;
  Mlp::Tape* st = tape ? &tape->scale : nullptr;
  Mlp::Tape* tt = tape ? &tape->translate : nullptr;
  Matrix log_s = scale_net_.Forward(in, st).array().rowwise() * inv.array();
  Matrix t = translate_net_.Forward(in, tt).array().rowwise() * inv.array();
  Matrix z = ((u - t).array() * (-log_s.array()).exp()).matrix();
  if (tape) {
    tape->net_input = std::move(in);
    tape->log_s = log_s;
    tape->z = z;
  }
  return z;
}

Matrix CouplingBlock::InverseBackward(const Tape& tape, const Matrix& grad_z) {
  const Eigen::RowVectorXd inv = Eigen::RowVectorXd::Ones(latent_dim_) - mask_;
  Matrix e = (-tape.log_s.array()).exp().matrix();
  // z = (u - t) e^{-s}:  dz/du = e^{-s}, dz/dt = -e^{-s}, dz/ds = -z.
  Matrix grad_u = grad_z.cwiseProduct(e);
  Matrix grad_t = (-grad_z.cwiseProduct(e)).array().rowwise() * inv.array();
  Matrix grad_s = (-grad_z.cwiseProduct(tape.z)).array().rowwise() * inv.array();
  Matrix grad_in = scale_net_.Backward(tape.scale, grad_s) + translate_net_.Backward(tape.translate, grad_t);
  grad_u += (grad_in.leftCols(latent_dim_).array().rowwise() * mask_.array()).matrix();
  return grad_u;
}

void CouplingBlock::CollectParameters(ParameterList& out) {
  scale_net_.CollectParameters(out);
  translate_net_.CollectParameters(out);
}

LatentFlow::LatentFlow(const FlowConfig& config) : config_(config) {
  config_.Validate();
  for (int k = 0; k < config_.num_coupling_blocks; ++k)
    blocks_.emplace_back("flow.couplings." + std::to_string(k), config_, k % 2 == 0);
}

void LatentFlow::Init(std::mt19937_64& rng) {
  for (auto& b : blocks_) b.Init(rng);
}

Matrix LatentFlow::CondMatrix(const EmbeddingBatch& cond, Eigen::Index rows) const {
  if (cond.rows() != rows)
    throw ShapeError("flow condition has " + std::to_string(cond.rows()) + " rows but latent batch has " +
                     std::to_string(rows));
  if (cond.width() != config_.condition_dim)
    throw ShapeError("flow condition width " + std::to_string(cond.width()) + " does not match condition_dim " +
                     std::to_string(config_.condition_dim));
  return Eigen::Map<const Matrix>(cond.values().data(), cond.rows(), cond.width());
}

FlowResult LatentFlow::Forward(const LatentBatch& z, const EmbeddingBatch& cond) const {
  if (z.cols() != config_.latent_dim) throw ShapeError("latent width does not match flow.latent_dim");
  Matrix c = CondMatrix(cond, z.rows());
  FlowResult r{z, Eigen::VectorXd::Zero(z.rows())};
  for (const auto& b : blocks_) r.u = b.Forward(r.u, c, r.logdet);
  return r;
}

LatentBatch LatentFlow::Inverse(const Matrix& u, const EmbeddingBatch& cond, Tape* tape) const {
  if (u.cols() != config_.latent_dim) throw ShapeError("base sample width does not match flow.latent_dim");
  Matrix c = CondMatrix(cond, u.rows());
  if (tape) tape->blocks.assign(blocks_.size(), {});
  Matrix x = u;
  for (size_t k = blocks_.size(); k-- > 0;) {
    CouplingBlock::Tape* bt = tape ? &tape->blocks[blocks_.size() - 1 - k] : nullptr;
    x = blocks_[k].Inverse(x, c, bt);
  }
  return x;
}

Matrix LatentFlow::InverseBackward(const Tape& tape, const Matrix& grad_z) {
  Matrix g = grad_z;
  // Tape order is inverse application order (last block first).
  for (size_t j = tape.blocks.size(); j-- > 0;) {
    size_t k = blocks_.size() - 1 - j;
    g = blocks_[k].InverseBackward(tape.blocks[j], g);
  }
  return g;
}

ParameterList LatentFlow::parameters() {
  ParameterList out;
  for (auto& b : blocks_) b.CollectParameters(out);
  return out;
}

}  // namespace zeroforge
