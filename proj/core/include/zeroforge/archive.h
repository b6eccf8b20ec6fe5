#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace zeroforge {

// Named dense arrays plus a JSON metadata record.
//
// File layout (little-endian):
//   "ZFCKPT\0\0"  u16 version  u64 metadata_len  metadata (UTF-8 JSON)
//   u32 count, then per array:
//     u32 name_len  name  u8 dtype (0 = f64, 1 = f32)  u8 ndim  u64 dims[ndim]  payload
struct ArrayEntry {
  enum class Dtype : uint8_t { kF64 = 0, kF32 = 1 };
  Dtype dtype = Dtype::kF64;
  std::vector<int64_t> shape;
  std::vector<double> values;
};

struct Archive {
  std::map<std::string, ArrayEntry> arrays;
  nlohmann::json metadata = nlohmann::json::object();
};

inline constexpr uint16_t kArchiveVersion = 1;

// Writes to a temporary file next to `path` and renames it into place.
void WriteArchive(const std::filesystem::path& path, const Archive& archive);
// Throws FormatError (naming the path) on bad magic, version or truncation.
Archive ReadArchive(const std::filesystem::path& path);

// Atomic whole-file write used by every writer in the library.
void WriteFileAtomic(const std::filesystem::path& path, const std::string& bytes);
std::string ReadFileBytes(const std::filesystem::path& path);

}  // namespace zeroforge
