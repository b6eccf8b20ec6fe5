#pragma once

#include <vector>

namespace zeroforge {

// Planar RGB image, 3 x S x S, values nominally in [0,1]. Row 0 is the top.
struct Image {
  static constexpr int kChannels = 3;
  int size = 0;
  std::vector<double> data;

  Image() = default;
  explicit Image(int s, double fill = 0.0)
      : size(s), data(static_cast<size_t>(kChannels) * s * s, fill) {}

  double& at(int c, int row, int col) { return data[(static_cast<size_t>(c) * size + row) * size + col]; }
  double at(int c, int row, int col) const { return data[(static_cast<size_t>(c) * size + row) * size + col]; }
  size_t plane() const { return static_cast<size_t>(size) * size; }
};

}  // namespace zeroforge
