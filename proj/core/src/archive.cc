#include "zeroforge/archive.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "zeroforge/errors.h"
#include "zeroforge/parameter.h"

namespace zeroforge {

static_assert(std::endian::native == std::endian::little, "archive I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'Z', 'F', 'C', 'K', 'P', 'T', '\0', '\0'};

template <typename T>
void Put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::filesystem::path& path) : bytes_(bytes), path_(path) {}

  template <typename T>
  T Get() {
    Need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string GetString(size_t n) {
    Need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  const char* Raw(size_t n) {
    Need(n);
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool AtEnd() const { return pos_ == bytes_.size(); }

 private:
  void Need(size_t n) {
    if (bytes_.size() - pos_ < n)
      throw FormatError(path_.string() + ": truncated archive (needed " + std::to_string(n) + " more bytes at offset " +
                        std::to_string(pos_) + ", file has " + std::to_string(bytes_.size()) + ")");
  }

  const std::string& bytes_;
  std::filesystem::path path_;
  size_t pos_ = 0;
};

}  // namespace

void WriteFileAtomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open " + tmp.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.flush();
    if (!f) throw Error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void WriteArchive(const std::filesystem::path& path, const Archive& archive) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  Put<uint16_t>(out, kArchiveVersion);
  const std::string meta = archive.metadata.dump();
  Put<uint64_t>(out, meta.size());
  out += meta;
  Put<uint32_t>(out, static_cast<uint32_t>(archive.arrays.size()));
  for (const auto& [name, a] : archive.arrays) {
    if (ShapeNumel(a.shape) != static_cast<int64_t>(a.values.size()))
      throw ShapeError("archive entry " + name + " has shape " + ShapeString(a.shape) + " but " +
                       std::to_string(a.values.size()) + " values");
    Put<uint32_t>(out, static_cast<uint32_t>(name.size()));
    out += name;
    Put<uint8_t>(out, static_cast<uint8_t>(a.dtype));
    Put<uint8_t>(out, static_cast<uint8_t>(a.shape.size()));
    for (int64_t d : a.shape) Put<uint64_t>(out, static_cast<uint64_t>(d));
    if (a.dtype == ArrayEntry::Dtype::kF64) {
      out.append(reinterpret_cast<const char*>(a.values.data()), a.values.size() * sizeof(double));
    } else {
      for (double v : a.values) Put<float>(out, static_cast<float>(v));
    }
  }
  WriteFileAtomic(path, out);
}

Archive ReadArchive(const std::filesystem::path& path) {
  const std::string bytes = ReadFileBytes(path);
  Reader r(bytes, path);
  if (std::memcmp(r.Raw(sizeof(kMagic)), kMagic, sizeof(kMagic)) != 0)
    throw FormatError(path.string() + ": not a checkpoint archive (bad magic)");
  const auto version = r.Get<uint16_t>();
  if (version != kArchiveVersion)
    throw FormatError(path.string() + ": unsupported archive version " + std::to_string(version));
  Archive archive;
  const auto meta_len = r.Get<uint64_t>();
  try {
    archive.metadata = nlohmann::json::parse(r.GetString(meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": corrupt archive metadata: " + e.what());
  }
  const auto count = r.Get<uint32_t>();
  for (uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.Get<uint32_t>();
    std::string name = r.GetString(name_len);
    ArrayEntry a;
    const auto dtype = r.Get<uint8_t>();
    if (dtype > 1) throw FormatError(path.string() + ": entry " + name + " has unknown dtype " + std::to_string(dtype));
    a.dtype = static_cast<ArrayEntry::Dtype>(dtype);
    const auto ndim = r.Get<uint8_t>();
    for (int d = 0; d < ndim; ++d) a.shape.push_back(static_cast<int64_t>(r.Get<uint64_t>()));
    const auto n = static_cast<size_t>(ShapeNumel(a.shape));
    a.values.resize(n);
    if (a.dtype == ArrayEntry::Dtype::kF64) {
      std::memcpy(a.values.data(), r.Raw(n * sizeof(double)), n * sizeof(double));
    } else {
      for (size_t k = 0; k < n; ++k) a.values[k] = r.Get<float>();
    }
    archive.arrays.emplace(std::move(name), std::move(a));
  }
  if (!r.AtEnd()) throw FormatError(path.string() + ": trailing bytes after the last archive entry");
  return archive;
}

}  // namespace zeroforge
