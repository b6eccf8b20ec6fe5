#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "zeroforge/camera.h"
#include "zeroforge/image.h"
#include "zeroforge/voxel_grid.h"

namespace zeroforge {

enum class Projection { kPerspective };

struct RenderConfig {
  int image_size = 224;
  int steps_per_ray = 0;  // 0 selects 2N for an N^3 grid
  double background = 0.0;
  double density_scale = 1.0;
  Projection projection = Projection::kPerspective;

  int StepsFor(int resolution) const { return steps_per_ray > 0 ? steps_per_ray : 2 * resolution; }
  void Validate() const;
};

// Absorption-only ray marcher over a soft occupancy grid.
//
// The grid fills [-1, 1]^3 with voxel centers at cell centers. Each pixel ray
// is sampled at fixed world spacing (cube diagonal / steps) starting half a
// step inside the cube; density at a sample is density_scale times the
// trilinear interpolation of the grid (zero outside). With step length delta
// measured in voxel edges, transmittance T = exp(-delta * sum density) and the
// pixel value is (1 - T) + T * background, replicated to three channels.
Image Render(const VoxelGrid& grid, const CameraPose& pose, const RenderConfig& config);

// Vector-Jacobian product of Render w.r.t. the voxel values.
VoxelGrid RenderBackward(const VoxelGrid& grid, const CameraPose& pose, const RenderConfig& config,
                         const Image& grad_image);

// Bilinear resampling with half-pixel centers (edge-clamped). Exact identity
// when the size does not change.
Image ResizeBilinear(const Image& image, int target_size);
Image ResizeBilinearBackward(const Image& grad, int source_size);

// Differentiable grid + pose -> image function. The built-in renderer is one
// implementation; external neural voxel renderers register under a name.
class RendererPlugin {
 public:
  virtual ~RendererPlugin() = default;
  virtual std::string name() const = 0;
  virtual int output_resolution() const = 0;
  virtual Image Render(const VoxelGrid& grid, const CameraPose& pose) const = 0;
  virtual VoxelGrid Backward(const VoxelGrid& grid, const CameraPose& pose, const Image& grad_image) const = 0;
};

class BuiltinRenderer final : public RendererPlugin {
 public:
  explicit BuiltinRenderer(RenderConfig config) : config_(config) { config_.Validate(); }
  std::string name() const override { return "builtin"; }
  int output_resolution() const override { return config_.image_size; }
  Image Render(const VoxelGrid& grid, const CameraPose& pose) const override {
    return zeroforge::Render(grid, pose, config_);
  }
  VoxelGrid Backward(const VoxelGrid& grid, const CameraPose& pose, const Image& grad_image) const override {
    return RenderBackward(grid, pose, config_, grad_image);
  }
  const RenderConfig& config() const { return config_; }

 private:
  RenderConfig config_;
};

// Throws ConfigError when no plugin is supplied.
Image RenderExternal(const VoxelGrid& grid, const CameraPose& pose, const RendererPlugin* plugin);

using RendererFactory =
    std::function<std::unique_ptr<RendererPlugin>(const std::string& checkpoint, const RenderConfig& config)>;

// "builtin" is always registered.
void RegisterRendererPlugin(const std::string& name, RendererFactory factory);
std::unique_ptr<RendererPlugin> MakeRendererPlugin(const std::string& name, const std::string& checkpoint,
                                                   const RenderConfig& config);
std::vector<std::string> RegisteredRendererPlugins();

}  // namespace zeroforge
