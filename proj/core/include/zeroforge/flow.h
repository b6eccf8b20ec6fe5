#pragma once

#include <random>
#include <vector>

#include "zeroforge/embedding.h"
#include "zeroforge/nn.h"

namespace zeroforge {

// Rows of a LatentBatch are 128-dim (by default) shape codes.
using LatentBatch = Matrix;

struct FlowConfig {
  int num_coupling_blocks = 5;
  int hidden_width = 1024;
  int latent_dim = 128;
  int condition_dim = 512;

  void Validate() const;
};

// One conditional affine coupling layer. The masked half of the input (plus
// the condition) drives a scale net (tanh activations) and a translate net
// (ReLU activations); the other half is transformed as
//   u = z * exp(log_s) + t        (forward, data -> base)
//   z = (u - t) * exp(-log_s)     (inverse, base -> data)
class CouplingBlock {
 public:
  struct Tape {
    Matrix net_input;  // [u * mask, cond]
    Matrix log_s;
    Matrix z;          // block output
    Mlp::Tape scale, translate;
  };

  CouplingBlock(const std::string& prefix, const FlowConfig& config, bool condition_on_first_half);

  void Init(std::mt19937_64& rng);
  // Returns u and adds sum(log_s) per row into logdet.
  Matrix Forward(const Matrix& z, const Matrix& cond, Eigen::VectorXd& logdet) const;
  Matrix Inverse(const Matrix& u, const Matrix& cond, Tape* tape) const;
  // Gradient w.r.t. u given the gradient w.r.t. the inverse output.
  Matrix InverseBackward(const Tape& tape, const Matrix& grad_z);

  const Eigen::RowVectorXd& mask() const { return mask_; }
  void CollectParameters(ParameterList& out);
  Mlp& scale_net() { return scale_net_; }
  Mlp& translate_net() { return translate_net_; }

 private:
  Matrix NetInput(const Matrix& x, const Matrix& cond) const;

  int latent_dim_;
  Eigen::RowVectorXd mask_;  // 1 = conditioning (pass-through) coordinate
  Mlp scale_net_;
  Mlp translate_net_;
};

struct FlowResult {
  Matrix u;
  Eigen::VectorXd logdet;
};

// Conditional RealNVP: a stack of coupling blocks with alternating masks.
// Final layers of every sub-network start at zero, so a freshly initialized
// flow is the identity map with zero log-determinant.
class LatentFlow {
 public:
  struct Tape {
    std::vector<CouplingBlock::Tape> blocks;  // in inverse application order
  };

  LatentFlow(const FlowConfig& config);

  const FlowConfig& config() const { return config_; }
  void Init(std::mt19937_64& rng);

  FlowResult Forward(const LatentBatch& z, const EmbeddingBatch& cond) const;
  LatentBatch Inverse(const Matrix& u, const EmbeddingBatch& cond, Tape* tape = nullptr) const;
  // Accumulates parameter gradients; returns the gradient w.r.t. u.
  Matrix InverseBackward(const Tape& tape, const Matrix& grad_z);

  ParameterList parameters();
  std::vector<CouplingBlock>& blocks() { return blocks_; }

 private:
  Matrix CondMatrix(const EmbeddingBatch& cond, Eigen::Index rows) const;

  FlowConfig config_;
  std::vector<CouplingBlock> blocks_;
};

}  // namespace zeroforge
