#pragma once

#include "zeroforge/voxel_grid.h"

namespace zeroforge {

// Soft threshold sigma(beta * (x - gamma)) and its hard counterpart x > gamma.
struct BinarizationParams {
  double beta = 200.0;
  double gamma = 0.05;

  void Validate() const;
};

// Numerically stable logistic function.
double Logistic(double t);

double SoftBinarize(double x, const BinarizationParams& params);
// d/dx of SoftBinarize: beta * s * (1 - s).
double SoftBinarizeDerivative(double x, const BinarizationParams& params);

// Elementwise soft binarization; result values lie in (0,1), binarized = false.
VoxelGrid BinarizeSoft(const VoxelGrid& grid, const BinarizationParams& params);

// Chain rule through BinarizeSoft: grad_in[i] = grad_out[i] * dB/dx(values[i]).
VoxelGrid BinarizeSoftBackward(const VoxelGrid& grid, const VoxelGrid& grad_out, const BinarizationParams& params);

// 1 where value > gamma, otherwise 0. Ties map to 0.
VoxelGrid BinarizeHard(const VoxelGrid& grid, double gamma);

}  // namespace zeroforge
