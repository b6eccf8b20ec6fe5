#pragma once

#include <cstdint>
#include <vector>

namespace zeroforge {

// Dense N x N x N occupancy field. Index order is (x, y, z) with x slowest and
// z fastest; y is the vertical axis for rendering.
struct VoxelGrid {
  int resolution = 0;
  std::vector<double> values;
  bool binarized = false;

  VoxelGrid() = default;
  explicit VoxelGrid(int n, double fill = 0.0, bool is_binary = false)
      : resolution(n), values(static_cast<size_t>(n) * n * n, fill), binarized(is_binary) {}

  size_t index(int x, int y, int z) const {
    return (static_cast<size_t>(x) * resolution + y) * resolution + z;
  }
  double& at(int x, int y, int z) { return values[index(x, y, z)]; }
  double at(int x, int y, int z) const { return values[index(x, y, z)]; }
  size_t size() const { return values.size(); }
};

}  // namespace zeroforge
