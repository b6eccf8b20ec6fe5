#pragma once

#include <Eigen/Core>

#include <random>
#include <string>
#include <vector>

#include "zeroforge/parameter.h"

namespace zeroforge {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation { kNone, kRelu, kTanh };

// y = x W^T + b with W stored [out, in] row-major. Rows of x are batch items.
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& prefix, int in, int out);

  int in_features() const { return in_; }
  int out_features() const { return out_; }

  // Uniform(-1/sqrt(in), 1/sqrt(in)) for weight and bias.
  void InitUniform(std::mt19937_64& rng);
  void InitZero();

  Matrix Forward(const Matrix& x) const;
  // Accumulates parameter gradients (trainable parameters only) and returns
  // the gradient w.r.t. x.
  Matrix Backward(const Matrix& x, const Matrix& grad_out);

  void CollectParameters(ParameterList& out) { out.push_back(&weight); out.push_back(&bias); }

  Parameter weight;
  Parameter bias;

 private:
  int in_ = 0;
  int out_ = 0;
};

// Linear -> act -> Linear -> act -> Linear.
class Mlp {
 public:
  struct Tape {
    std::vector<Matrix> inputs;  // input to each linear layer
    std::vector<Matrix> pre;     // pre-activation output of hidden layers
  };

  Mlp() = default;
  Mlp(const std::string& prefix, int in, int hidden, int out, Activation act);

  void InitUniform(std::mt19937_64& rng, bool zero_last);
  Matrix Forward(const Matrix& x, Tape* tape) const;
  Matrix Backward(const Tape& tape, const Matrix& grad_out);
  void CollectParameters(ParameterList& out);

  std::vector<Linear>& layers() { return layers_; }

 private:
  std::vector<Linear> layers_;
  Activation act_ = Activation::kRelu;
};

// Dense C x S x S x S activation volume, index order (c, x, y, z).
struct Volume {
  int channels = 0;
  int size = 0;
  std::vector<double> data;

  Volume() = default;
  Volume(int c, int s) : channels(c), size(s), data(static_cast<size_t>(c) * s * s * s, 0.0) {}
  size_t voxels() const { return static_cast<size_t>(size) * size * size; }
};

Volume Relu(const Volume& v);
// grad * 1[pre > 0]
Volume ReluBackward(const Volume& pre, const Volume& grad);
// Nearest-neighbour 2x upsampling and its adjoint.
Volume Upsample2(const Volume& v);
Volume Upsample2Backward(const Volume& grad, int in_size);
void AddInPlace(Volume& dst, const Volume& src);

// 3D convolution with cubic kernel k (1 or 3), stride 1, zero padding k/2.
class Conv3d {
 public:
  Conv3d() = default;
  Conv3d(const std::string& prefix, int in, int out, int kernel);

  void InitUniform(std::mt19937_64& rng);
  void InitZero();

  Volume Forward(const Volume& x) const;
  // Accumulates parameter gradients (trainable parameters only) and returns
  // the gradient w.r.t. x.
  Volume Backward(const Volume& x, const Volume& grad_out);

  void CollectParameters(ParameterList& out) { out.push_back(&weight); out.push_back(&bias); }
  void SetTrainable(bool t) { weight.trainable = t; bias.trainable = t; }

  Parameter weight;  // [out, in, k, k, k]
  Parameter bias;    // [out]

 private:
  int in_ = 0;
  int out_ = 0;
  int kernel_ = 1;
};

}  // namespace zeroforge
