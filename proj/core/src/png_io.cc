#include "zeroforge/png_io.h"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "zeroforge/archive.h"
#include "zeroforge/errors.h"

namespace zeroforge {

void WritePng(const std::filesystem::path& path, const Image& image) {
  const int s = image.size;
  if (s <= 0 || image.data.size() != 3 * image.plane()) throw ShapeError("image has inconsistent size");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = s;
  img.height = s;
  img.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> px(static_cast<size_t>(3) * s * s);
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        const double v = std::clamp(image.at(ch, r, c), 0.0, 1.0);
        px[(static_cast<size_t>(r) * s + c) * 3 + ch] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
  png_alloc_size_t bytes = 0;
  if (!png_image_write_to_memory(&img, nullptr, &bytes, 0, px.data(), 0, nullptr))
    throw FormatError(path.string() + ": png encoding failed: " + img.message);
  std::string buf(bytes, '\0');
  if (!png_image_write_to_memory(&img, buf.data(), &bytes, 0, px.data(), 0, nullptr))
    throw FormatError(path.string() + ": png encoding failed: " + img.message);
  buf.resize(bytes);
  WriteFileAtomic(path, buf);
}

Image ReadPng(const std::filesystem::path& path) {
  const std::string bytes = ReadFileBytes(path);
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
    throw FormatError(path.string() + ": " + img.message);
  if (img.width != img.height) {
    png_image_free(&img);
    throw FormatError(path.string() + ": only square images are supported");
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> px(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, px.data(), 0, nullptr))
    throw FormatError(path.string() + ": " + img.message);
  const int s = static_cast<int>(img.width);
  Image out(s);
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c)
      for (int ch = 0; ch < 3; ++ch) out.at(ch, r, c) = px[(static_cast<size_t>(r) * s + c) * 3 + ch] / 255.0;
  return out;
}

}  // namespace zeroforge
