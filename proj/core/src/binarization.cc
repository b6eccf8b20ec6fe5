#include "zeroforge/binarization.h"

#include <cmath>

#include "zeroforge/errors.h"

namespace zeroforge {

void BinarizationParams::Validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw ParameterError("binarize.beta must be positive, got " + std::to_string(beta));
  if (!std::isfinite(gamma)) throw ParameterError("binarize.gamma must be finite");
}

double Logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double SoftBinarize(double x, const BinarizationParams& params) {
  return Logistic(params.beta * (x - params.gamma));
}

double SoftBinarizeDerivative(double x, const BinarizationParams& params) {
  const double s = SoftBinarize(x, params);
  return params.beta * s * (1.0 - s);
}

VoxelGrid BinarizeSoft(const VoxelGrid& grid, const BinarizationParams& params) {
  params.Validate();
  VoxelGrid out(grid.resolution);
  for (size_t i = 0; i < grid.size(); ++i) out.values[i] = SoftBinarize(grid.values[i], params);
  return out;
}

VoxelGrid BinarizeSoftBackward(const VoxelGrid& grid, const VoxelGrid& grad_out, const BinarizationParams& params) {
  params.Validate();
  if (grad_out.size() != grid.size()) throw ShapeError("binarization gradient has the wrong size");
  VoxelGrid out(grid.resolution);
  for (size_t i = 0; i < grid.size(); ++i)
    out.values[i] = grad_out.values[i] * SoftBinarizeDerivative(grid.values[i], params);
  return out;
}

VoxelGrid BinarizeHard(const VoxelGrid& grid, double gamma) {
  VoxelGrid out(grid.resolution, 0.0, /*is_binary=*/true);
  for (size_t i = 0; i < grid.size(); ++i) out.values[i] = grid.values[i] > gamma ? 1.0 : 0.0;
  return out;
}

}  // namespace zeroforge
