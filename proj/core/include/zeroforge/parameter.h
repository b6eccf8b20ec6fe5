#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace zeroforge {

// A named dense parameter array with its gradient accumulator.
struct Parameter {
  std::string name;
  std::vector<int64_t> shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string n, std::vector<int64_t> s);

  int64_t numel() const { return static_cast<int64_t>(value.size()); }
  void ZeroGrad();
};

// Ordered list of non-owning parameter handles. Order is stable for a given
// model configuration and is the order used by checkpoints and the optimizer.
using ParameterList = std::vector<Parameter*>;

// FNV-1a 64 over the raw bytes of every value, in list order, including names.
uint64_t Checksum(const ParameterList& params);
uint64_t Checksum(std::span<const double> values);

int64_t ShapeNumel(const std::vector<int64_t>& shape);
std::string ShapeString(const std::vector<int64_t>& shape);

}  // namespace zeroforge
