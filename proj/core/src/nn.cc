#include "zeroforge/nn.h"

#include <algorithm>
#include <cmath>

#include "zeroforge/errors.h"

namespace zeroforge {

namespace {

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;

void FillUniform(std::vector<double>& v, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& x : v) x = dist(rng);
}

}  // namespace

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(const std::string& prefix, int in, int out)
    : weight(prefix + ".weight", {out, in}), bias(prefix + ".bias", {out}), in_(in), out_(out) {}

void Linear::InitUniform(std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
  FillUniform(weight.value, bound, rng);
  FillUniform(bias.value, bound, rng);
}

void Linear::InitZero() {
  std::fill(weight.value.begin(), weight.value.end(), 0.0);
  std::fill(bias.value.begin(), bias.value.end(), 0.0);
}

Matrix Linear::Forward(const Matrix& x) const {
  if (x.cols() != in_) throw ShapeError("linear layer " + weight.name + " expects " + std::to_string(in_) + " inputs");
  ConstMap w(weight.value.data(), out_, in_);
  Eigen::Map<const Eigen::RowVectorXd> b(bias.value.data(), out_);
  Matrix y = x * w.transpose();
  y.rowwise() += b;
  return y;
}

Matrix Linear::Backward(const Matrix& x, const Matrix& grad_out) {
  ConstMap w(weight.value.data(), out_, in_);
  if (weight.trainable) {
    MutMap gw(weight.grad.data(), out_, in_);
    gw.noalias() += grad_out.transpose() * x;
  }
  if (bias.trainable) {
    Eigen::Map<Eigen::RowVectorXd> gb(bias.grad.data(), out_);
    gb += grad_out.colwise().sum();
  }
  return grad_out * w;
}

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(const std::string& prefix, int in, int hidden, int out, Activation act) : act_(act) {
  // Indices follow torch.nn.Sequential numbering (activations occupy odd slots).
  layers_.emplace_back(prefix + ".0", in, hidden);
  layers_.emplace_back(prefix + ".2", hidden, hidden);
  layers_.emplace_back(prefix + ".4", hidden, out);
}

void Mlp::InitUniform(std::mt19937_64& rng, bool zero_last) {
  for (auto& l : layers_) l.InitUniform(rng);
  if (zero_last) layers_.back().InitZero();
}

Matrix Mlp::Forward(const Matrix& x, Tape* tape) const {
  if (tape) {
    tape->inputs.clear();
    tape->pre.clear();
  }
  Matrix h = x;
  for (size_t i = 0; i < layers_.size(); ++i) {
    if (tape) tape->inputs.push_back(h);
    h = layers_[i].Forward(h);
    if (i + 1 < layers_.size()) {
      if (tape) tape->pre.push_back(h);
      if (act_ == Activation::kRelu) h = h.cwiseMax(0.0);
      else if (act_ == Activation::kTanh) h = h.array().tanh().matrix();
    }
  }
  return h;
}

Matrix Mlp::Backward(const Tape& tape, const Matrix& grad_out) {
  Matrix g = grad_out;
  for (size_t k = layers_.size(); k-- > 0;) {
    g = layers_[k].Backward(tape.inputs[k], g);
    if (k > 0) {
      const Matrix& pre = tape.pre[k - 1];
      if (act_ == Activation::kRelu) {
        g = g.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
      } else if (act_ == Activation::kTanh) {
        Matrix t = pre.array().tanh().matrix();
        g = g.cwiseProduct((1.0 - t.array().square()).matrix());
      }
    }
  }
  return g;
}

void Mlp::CollectParameters(ParameterList& out) {
  for (auto& l : layers_) l.CollectParameters(out);
}

// ---------------------------------------------------------------------------
// Volume helpers

Volume Relu(const Volume& v) {
  Volume out = v;
  for (double& x : out.data) x = x > 0.0 ? x : 0.0;
  return out;
}

Volume ReluBackward(const Volume& pre, const Volume& grad) {
  Volume out = grad;
  for (size_t i = 0; i < out.data.size(); ++i)
    if (!(pre.data[i] > 0.0)) out.data[i] = 0.0;
  return out;
}

Volume Upsample2(const Volume& v) {
  const int s = v.size, t = 2 * v.size;
  Volume out(v.channels, t);
  for (int c = 0; c < v.channels; ++c)
    for (int x = 0; x < t; ++x)
      for (int y = 0; y < t; ++y) {
        const double* src = v.data.data() + ((static_cast<size_t>(c) * s + x / 2) * s + y / 2) * s;
        double* dst = out.data.data() + ((static_cast<size_t>(c) * t + x) * t + y) * t;
        for (int z = 0; z < t; ++z) dst[z] = src[z / 2];
      }
  return out;
}

Volume Upsample2Backward(const Volume& grad, int in_size) {
  const int s = in_size, t = grad.size;
  Volume out(grad.channels, s);
  for (int c = 0; c < grad.channels; ++c)
    for (int x = 0; x < t; ++x)
      for (int y = 0; y < t; ++y) {
        double* dst = out.data.data() + ((static_cast<size_t>(c) * s + x / 2) * s + y / 2) * s;
        const double* src = grad.data.data() + ((static_cast<size_t>(c) * t + x) * t + y) * t;
        for (int z = 0; z < t; ++z) dst[z / 2] += src[z];
      }
  return out;
}

void AddInPlace(Volume& dst, const Volume& src) {
  if (dst.data.size() != src.data.size()) throw ShapeError("volume sizes differ");
  for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

// ---------------------------------------------------------------------------
// Conv3d

Conv3d::Conv3d(const std::string& prefix, int in, int out, int kernel)
    : weight(prefix + ".weight", {out, in, kernel, kernel, kernel}),
      bias(prefix + ".bias", {out}),
      in_(in),
      out_(out),
      kernel_(kernel) {
  if (kernel != 1 && kernel != 3) throw ConfigError("Conv3d supports kernel sizes 1 and 3");
}

void Conv3d::InitUniform(std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_ * kernel_ * kernel_ * kernel_));
  FillUniform(weight.value, bound, rng);
  FillUniform(bias.value, bound, rng);
}

void Conv3d::InitZero() {
  std::fill(weight.value.begin(), weight.value.end(), 0.0);
  std::fill(bias.value.begin(), bias.value.end(), 0.0);
}

Volume Conv3d::Forward(const Volume& x) const {
  if (x.channels != in_) throw ShapeError("conv " + weight.name + " expects " + std::to_string(in_) + " channels");
  const int s = x.size, k = kernel_, pad = k / 2;
  const size_t vox = x.voxels();
  Volume y(out_, s);
  for (int o = 0; o < out_; ++o) {
    double* yo = y.data.data() + o * vox;
    std::fill(yo, yo + vox, bias.value[o]);
    for (int i = 0; i < in_; ++i) {
      const double* xi = x.data.data() + i * vox;
      const double* w = weight.value.data() + (static_cast<size_t>(o) * in_ + i) * k * k * k;
      for (int kx = 0; kx < k; ++kx)
        for (int ky = 0; ky < k; ++ky)
          for (int kz = 0; kz < k; ++kz) {
            const double wv = w[(kx * k + ky) * k + kz];
            const int dx = kx - pad, dy = ky - pad, dz = kz - pad;
            const int x0 = std::max(0, -dx), x1 = std::min(s, s - dx);
            const int y0 = std::max(0, -dy), y1 = std::min(s, s - dy);
            const int z0 = std::max(0, -dz), z1 = std::min(s, s - dz);
            for (int px = x0; px < x1; ++px)
              for (int py = y0; py < y1; ++py) {
                double* dst = yo + (static_cast<size_t>(px) * s + py) * s;
                const double* src = xi + (static_cast<size_t>(px + dx) * s + (py + dy)) * s + dz;
                for (int pz = z0; pz < z1; ++pz) dst[pz] += wv * src[pz];
              }
          }
    }
  }
  return y;
}

Volume Conv3d::Backward(const Volume& x, const Volume& grad_out) {
  const int s = x.size, k = kernel_, pad = k / 2;
  const size_t vox = x.voxels();
  Volume gx(in_, s);
  for (int o = 0; o < out_; ++o) {
    const double* go = grad_out.data.data() + o * vox;
    if (bias.trainable) {
      double sum = 0.0;
      for (size_t v = 0; v < vox; ++v) sum += go[v];
      bias.grad[o] += sum;
    }
    for (int i = 0; i < in_; ++i) {
      const double* xi = x.data.data() + i * vox;
      double* gxi = gx.data.data() + i * vox;
      const size_t wbase = (static_cast<size_t>(o) * in_ + i) * k * k * k;
      for (int kx = 0; kx < k; ++kx)
        for (int ky = 0; ky < k; ++ky)
          for (int kz = 0; kz < k; ++kz) {
            const size_t widx = wbase + (kx * k + ky) * k + kz;
            const double wv = weight.value[widx];
            const int dx = kx - pad, dy = ky - pad, dz = kz - pad;
            const int x0 = std::max(0, -dx), x1 = std::min(s, s - dx);
            const int y0 = std::max(0, -dy), y1 = std::min(s, s - dy);
            const int z0 = std::max(0, -dz), z1 = std::min(s, s - dz);
            double gw = 0.0;
            for (int px = x0; px < x1; ++px)
              for (int py = y0; py < y1; ++py) {
                const double* g = go + (static_cast<size_t>(px) * s + py) * s;
                const size_t off = (static_cast<size_t>(px + dx) * s + (py + dy)) * s + dz;
                const double* src = xi + off;
                double* dst = gxi + off;
                for (int pz = z0; pz < z1; ++pz) {
                  gw += g[pz] * src[pz];
                  dst[pz] += wv * g[pz];
                }
              }
            if (weight.trainable) weight.grad[widx] += gw;
          }
    }
  }
  return gx;
}

}  // namespace zeroforge
