#pragma once

#include <span>
#include <vector>

namespace zeroforge {

// B x H matrix of embedding vectors stored row-major. Rows of a normalized
// batch have unit Euclidean norm.
class EmbeddingBatch {
 public:
  EmbeddingBatch() = default;
  EmbeddingBatch(int rows, int width, bool normalized = false);
  EmbeddingBatch(int rows, int width, std::vector<double> values, bool normalized);

  int rows() const { return rows_; }
  int width() const { return width_; }
  bool normalized() const { return normalized_; }

  std::span<double> row(int i) { return {values_.data() + static_cast<size_t>(i) * width_, static_cast<size_t>(width_)}; }
  std::span<const double> row(int i) const {
    return {values_.data() + static_cast<size_t>(i) * width_, static_cast<size_t>(width_)};
  }
  double& at(int i, int j) { return values_[static_cast<size_t>(i) * width_ + j]; }
  double at(int i, int j) const { return values_[static_cast<size_t>(i) * width_ + j]; }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& mutable_values() { return values_; }

  // Rescales every row to unit norm. Throws DomainError on a zero row.
  void Normalize();
  // True when every row has norm 1 within `tol`.
  bool RowsAreUnit(double tol = 1e-6) const;
  // Sets the normalized flag after verifying the rows.
  void MarkNormalized();

  // Selects rows by index (duplicates allowed).
  EmbeddingBatch Gather(std::span<const int> indices) const;

 private:
  int rows_ = 0;
  int width_ = 0;
  bool normalized_ = false;
  std::vector<double> values_;
};

double Dot(std::span<const double> a, std::span<const double> b);
double Cosine(std::span<const double> a, std::span<const double> b);

// Backward of row-wise L2 normalization: given the raw rows and the gradient
// with respect to the normalized rows, returns the gradient w.r.t. raw rows.
std::vector<double> NormalizeBackward(std::span<const double> raw, std::span<const double> grad_normalized);

}  // namespace zeroforge
