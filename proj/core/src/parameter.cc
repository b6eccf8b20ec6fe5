#include "zeroforge/parameter.h"

#include <cstring>
#include <sstream>

namespace zeroforge {

namespace {

constexpr uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr uint64_t kFnvPrime = 1099511628211ULL;

uint64_t Mix(uint64_t h, const void* data, size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

}  // namespace

Parameter::Parameter(std::string n, std::vector<int64_t> s)
    : name(std::move(n)), shape(std::move(s)) {
  value.assign(ShapeNumel(shape), 0.0);
  grad.assign(value.size(), 0.0);
}

void Parameter::ZeroGrad() { grad.assign(value.size(), 0.0); }

uint64_t Checksum(const ParameterList& params) {
  uint64_t h = kFnvOffset;
  for (const Parameter* p : params) {
    h = Mix(h, p->name.data(), p->name.size());
    h = Mix(h, p->value.data(), p->value.size() * sizeof(double));
  }
  return h;
}

uint64_t Checksum(std::span<const double> values) {
  return Mix(kFnvOffset, values.data(), values.size_bytes());
}

int64_t ShapeNumel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string ShapeString(const std::vector<int64_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

}  // namespace zeroforge
