#include "zeroforge/embedding.h"

#include <cmath>

#include "zeroforge/errors.h"

namespace zeroforge {

EmbeddingBatch::EmbeddingBatch(int rows, int width, bool normalized)
    : rows_(rows), width_(width), normalized_(normalized),
      values_(static_cast<size_t>(rows) * width, 0.0) {
  if (rows < 1 || width < 1) throw ShapeError("embedding batch needs rows >= 1 and width >= 1");
}

EmbeddingBatch::EmbeddingBatch(int rows, int width, std::vector<double> values, bool normalized)
    : rows_(rows), width_(width), normalized_(false), values_(std::move(values)) {
  if (rows < 1 || width < 1) throw ShapeError("embedding batch needs rows >= 1 and width >= 1");
  if (values_.size() != static_cast<size_t>(rows) * width)
    throw ShapeError("embedding batch value count does not match rows x width");
  if (normalized) MarkNormalized();
}

void EmbeddingBatch::Normalize() {
  for (int i = 0; i < rows_; ++i) {
    auto r = row(i);
    double n = std::sqrt(Dot(r, r));
    if (!(n > 0.0) || !std::isfinite(n)) throw DomainError("cannot normalize a zero or non-finite embedding row");
    for (double& v : r) v /= n;
  }
  normalized_ = true;
}

bool EmbeddingBatch::RowsAreUnit(double tol) const {
  for (int i = 0; i < rows_; ++i) {
    auto r = row(i);
    if (std::abs(std::sqrt(Dot(r, r)) - 1.0) > tol) return false;
  }
  return true;
}

void EmbeddingBatch::MarkNormalized() {
  if (!RowsAreUnit()) throw DomainError("embedding rows are not unit norm");
  normalized_ = true;
}

EmbeddingBatch EmbeddingBatch::Gather(std::span<const int> indices) const {
  EmbeddingBatch out(static_cast<int>(indices.size()), width_);
  for (size_t k = 0; k < indices.size(); ++k) {
    int i = indices[k];
    if (i < 0 || i >= rows_) throw ShapeError("gather index out of range");
    auto src = row(i);
    auto dst = out.row(static_cast<int>(k));
    std::copy(src.begin(), src.end(), dst.begin());
  }
  out.normalized_ = normalized_;
  return out;
}

double Dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("dot product of vectors with different lengths");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double Cosine(std::span<const double> a, std::span<const double> b) {
  return Dot(a, b) / std::sqrt(Dot(a, a) * Dot(b, b));
}

std::vector<double> NormalizeBackward(std::span<const double> raw, std::span<const double> grad_normalized) {
  // y = x/|x|  =>  dx = (g - y (y.g)) / |x|
  const double n = std::sqrt(Dot(raw, raw));
  double yg = 0.0;
  for (size_t i = 0; i < raw.size(); ++i) yg += raw[i] / n * grad_normalized[i];
  std::vector<double> out(raw.size());
  for (size_t i = 0; i < raw.size(); ++i) out[i] = (grad_normalized[i] - raw[i] / n * yg) / n;
  return out;
}

}  // namespace zeroforge
