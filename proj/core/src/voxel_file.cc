#include "zeroforge/voxel_file.h"

#include <cstring>

#include "zeroforge/archive.h"
#include "zeroforge/errors.h"

namespace zeroforge {

namespace {

constexpr char kMagic[8] = {'Z', 'F', 'V', 'O', 'X', 'E', 'L', '\0'};
constexpr size_t kHeaderSize = 8 + 2 + 4 + 1;

template <typename T>
void Put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T Get(const std::string& in, size_t offset) {
  T v;
  std::memcpy(&v, in.data() + offset, sizeof(T));
  return v;
}

}  // namespace

void WriteVoxelFile(const std::filesystem::path& path, const VoxelGrid& grid, VoxelDtype dtype) {
  const size_t n = static_cast<size_t>(grid.resolution) * grid.resolution * grid.resolution;
  if (grid.resolution <= 0 || grid.values.size() != n) throw ShapeError("voxel grid has inconsistent size");
  if (dtype == VoxelDtype::kU8Binary && !grid.binarized)
    throw DomainError("u8-binary export needs a hard-binarized grid");
  std::string out(kMagic, 8);
  Put<uint16_t>(out, kVoxelFileVersion);
  Put<uint32_t>(out, static_cast<uint32_t>(grid.resolution));
  Put<uint8_t>(out, static_cast<uint8_t>(dtype));
  if (dtype == VoxelDtype::kU8Binary) {
    out.reserve(out.size() + n);
    for (double v : grid.values) {
      if (v != 0.0 && v != 1.0) throw DomainError("binarized grid contains a value other than 0 or 1");
      out.push_back(v == 1.0 ? '\1' : '\0');
    }
  } else {
    out.reserve(out.size() + 4 * n);
    for (double v : grid.values) Put<float>(out, static_cast<float>(v));
  }
  WriteFileAtomic(path, out);
}

VoxelGrid ReadVoxelFile(const std::filesystem::path& path) {
  const std::string in = ReadFileBytes(path);
  const std::string where = path.string() + ": ";
  if (in.size() < 8 || std::memcmp(in.data(), kMagic, 8) != 0) throw FormatError(where + "bad magic, not a voxel file");
  if (in.size() < kHeaderSize) throw FormatError(where + "truncated header");
  const auto version = Get<uint16_t>(in, 8);
  if (version != kVoxelFileVersion)
    throw FormatError(where + "unsupported voxel file version " + std::to_string(version));
  const auto res = Get<uint32_t>(in, 10);
  const auto dtype = Get<uint8_t>(in, 14);
  if (dtype > 1) throw FormatError(where + "unknown dtype " + std::to_string(dtype));
  if (res == 0 || res > 4096) throw FormatError(where + "implausible resolution " + std::to_string(res));
  const size_t n = static_cast<size_t>(res) * res * res;
  const size_t expected = kHeaderSize + n * (dtype == 0 ? 1 : 4);
  if (in.size() != expected)
    throw FormatError(where + (in.size() < expected ? "truncated payload" : "trailing bytes") + ": expected " +
                      std::to_string(expected) + " bytes, found " + std::to_string(in.size()));
  VoxelGrid grid(static_cast<int>(res));
  if (dtype == 0) {
    grid.binarized = true;
    for (size_t i = 0; i < n; ++i) {
      const auto b = static_cast<unsigned char>(in[kHeaderSize + i]);
      if (b > 1) throw FormatError(where + "binary payload byte " + std::to_string(i) + " is " + std::to_string(b));
      grid.values[i] = b;
    }
  } else {
    for (size_t i = 0; i < n; ++i) grid.values[i] = Get<float>(in, kHeaderSize + 4 * i);
  }
  return grid;
}

VoxelGrid ResampleNearest(const VoxelGrid& grid, int resolution) {
  if (resolution <= 0) throw ConfigError("resolution must be positive");
  if (resolution == grid.resolution) return grid;
  VoxelGrid out(resolution, 0.0, grid.binarized);
  const int n = grid.resolution;
  auto src = [&](int i) { return std::min(n - 1, static_cast<int>((i + 0.5) * n / resolution)); };
  for (int x = 0; x < resolution; ++x)
    for (int y = 0; y < resolution; ++y)
      for (int z = 0; z < resolution; ++z) out.at(x, y, z) = grid.at(src(x), src(y), src(z));
  return out;
}

}  // namespace zeroforge
