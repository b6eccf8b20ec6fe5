#pragma once

#include <filesystem>

#include "zeroforge/image.h"

namespace zeroforge {

// 8-bit RGB PNG. Values are clamped to [0,1] and rounded to the nearest level.
void WritePng(const std::filesystem::path& path, const Image& image);
// Reads 8-bit RGB or gray PNGs back into [0,1] planar form (square only).
Image ReadPng(const std::filesystem::path& path);

}  // namespace zeroforge
