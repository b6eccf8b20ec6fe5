#pragma once

#include <cstdint>
#include <filesystem>

#include "zeroforge/voxel_grid.h"

namespace zeroforge {

// Dense voxel file, little-endian:
//   "ZFVOXEL\0"  u16 version (1)  u32 resolution  u8 dtype  payload
// dtype 0 stores one byte per voxel with values in {0,1}; dtype 1 stores f32.
// Payload order matches VoxelGrid (x slowest, z fastest).
enum class VoxelDtype : uint8_t { kU8Binary = 0, kF32Soft = 1 };

inline constexpr uint16_t kVoxelFileVersion = 1;

// kU8Binary requires grid.binarized; use BinarizeHard first for soft grids.
void WriteVoxelFile(const std::filesystem::path& path, const VoxelGrid& grid, VoxelDtype dtype);
// Binary files load with binarized = true. Errors name the path and the
// failing check (magic, version, dtype, payload size, non-binary byte).
VoxelGrid ReadVoxelFile(const std::filesystem::path& path);

// Nearest-neighbour resampling to a new edge length, used for --resolution.
VoxelGrid ResampleNearest(const VoxelGrid& grid, int resolution);

}  // namespace zeroforge
