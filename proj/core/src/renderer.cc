#include "zeroforge/renderer.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

#include "zeroforge/errors.h"

namespace zeroforge {

void RenderConfig::Validate() const {
  if (image_size < 1) throw ConfigError("render.image_size must be >= 1");
  if (steps_per_ray < 0) throw ConfigError("render.steps_per_ray must be >= 0 (0 selects 2N)");
  if (!(background >= 0.0 && background <= 1.0)) throw ConfigError("render.background must lie in [0, 1]");
  if (!(density_scale > 0.0)) throw ConfigError("render.density_scale must be positive");
}

namespace {

// Ray-cube intersection against [-1, 1]^3. Returns false on a miss.
bool IntersectUnitCube(const Vec3& o, const Vec3& d, double& t0, double& t1) {
  t0 = 0.0;
  t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < -1.0 || o[a] > 1.0) return false;
      continue;
    }
    double ta = (-1.0 - o[a]) / d[a];
    double tb = (1.0 - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return t1 > t0;
}

// Trilinear corner indices and weights at continuous voxel coordinate g.
struct Corners {
  size_t index[8];
  double weight[8];
  int count = 0;
};

Corners TrilinearCorners(int n, double gx, double gy, double gz) {
  Corners c;
  const int x0 = static_cast<int>(std::floor(gx)), y0 = static_cast<int>(std::floor(gy)),
            z0 = static_cast<int>(std::floor(gz));
  const double fx = gx - x0, fy = gy - y0, fz = gz - z0;
  for (int dx = 0; dx < 2; ++dx) {
    const int x = x0 + dx;
    if (x < 0 || x >= n) continue;
    const double wx = dx ? fx : 1.0 - fx;
    for (int dy = 0; dy < 2; ++dy) {
      const int y = y0 + dy;
      if (y < 0 || y >= n) continue;
      const double wy = dy ? fy : 1.0 - fy;
      for (int dz = 0; dz < 2; ++dz) {
        const int z = z0 + dz;
        if (z < 0 || z >= n) continue;
        const double wz = dz ? fz : 1.0 - fz;
        c.index[c.count] = (static_cast<size_t>(x) * n + y) * n + z;
        c.weight[c.count] = wx * wy * wz;
        ++c.count;
      }
    }
  }
  return c;
}

void CheckRenderable(const VoxelGrid& grid) {
  if (grid.resolution < 1 || grid.values.size() != static_cast<size_t>(grid.resolution) * grid.resolution * grid.resolution)
    throw ShapeError("voxel grid buffer does not hold N^3 values");
  for (double v : grid.values)
    if (!(v >= 0.0 && v <= 1.0))
      throw DomainError("render expects grid values in [0, 1]; soft-binarize the decoder output first");
}

// Visits every sample along a pixel ray.
template <typename Visit>
void MarchRay(const VoxelGrid& grid, const CameraFrame& frame, const Vec3& dir, int steps, Visit&& visit) {
  double t0, t1;
  if (!IntersectUnitCube(frame.eye, dir, t0, t1)) return;
  const int n = grid.resolution;
  const double step = 2.0 * std::sqrt(3.0) / steps;
  const double half_n = 0.5 * n;
  for (int k = 0;; ++k) {
    const double t = t0 + (k + 0.5) * step;
    if (t >= t1) break;
    const double px = frame.eye[0] + t * dir[0], py = frame.eye[1] + t * dir[1], pz = frame.eye[2] + t * dir[2];
    visit(TrilinearCorners(n, (px + 1.0) * half_n - 0.5, (py + 1.0) * half_n - 0.5, (pz + 1.0) * half_n - 0.5));
  }
}

}  // namespace

Image Render(const VoxelGrid& grid, const CameraPose& pose, const RenderConfig& config) {
  config.Validate();
  pose.Validate();
  CheckRenderable(grid);
  const int s = config.image_size;
  const int steps = config.StepsFor(grid.resolution);
  const double delta = std::sqrt(3.0) * grid.resolution / steps;  // step length in voxel edges
  const CameraFrame frame = CameraFrame::FromPose(pose);
  Image out(s);
  for (int r = 0; r < s; ++r) {
    for (int c = 0; c < s; ++c) {
      double optical = 0.0;
      MarchRay(grid, frame, frame.RayDirection(r, c, s), steps, [&](const Corners& k) {
        double sample = 0.0;
        for (int i = 0; i < k.count; ++i) sample += k.weight[i] * grid.values[k.index[i]];
        optical += config.density_scale * sample;
      });
      const double trans = std::exp(-delta * optical);
      const double v = (1.0 - trans) + trans * config.background;
      for (int ch = 0; ch < Image::kChannels; ++ch) out.at(ch, r, c) = v;
    }
  }
  return out;
}

VoxelGrid RenderBackward(const VoxelGrid& grid, const CameraPose& pose, const RenderConfig& config,
                         const Image& grad_image) {
  config.Validate();
  pose.Validate();
  CheckRenderable(grid);
  const int s = config.image_size;
  if (grad_image.size != s) throw ShapeError("render gradient image has the wrong size");
  const int steps = config.StepsFor(grid.resolution);
  const double delta = std::sqrt(3.0) * grid.resolution / steps;
  const CameraFrame frame = CameraFrame::FromPose(pose);
  VoxelGrid grad(grid.resolution);
  for (int r = 0; r < s; ++r) {
    for (int c = 0; c < s; ++c) {
      double g = 0.0;
      for (int ch = 0; ch < Image::kChannels; ++ch) g += grad_image.at(ch, r, c);
      if (g == 0.0) continue;
      const Vec3 dir = frame.RayDirection(r, c, s);
      double optical = 0.0;
      MarchRay(grid, frame, dir, steps, [&](const Corners& k) {
        double sample = 0.0;
        for (int i = 0; i < k.count; ++i) sample += k.weight[i] * grid.values[k.index[i]];
        optical += config.density_scale * sample;
      });
      const double trans = std::exp(-delta * optical);
      // pixel = 1 - T (1 - bg);  d pixel / d optical = (1 - bg) delta T
      const double coeff = g * (1.0 - config.background) * delta * trans * config.density_scale;
      MarchRay(grid, frame, dir, steps, [&](const Corners& k) {
        for (int i = 0; i < k.count; ++i) grad.values[k.index[i]] += coeff * k.weight[i];
      });
    }
  }
  return grad;
}

namespace {

struct Tap {
  int i0, i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

std::vector<Tap> BilinearTaps(int in, int out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / out;
  for (int d = 0; d < out; ++d) {
    double src = (d + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int i0 = static_cast<int>(std::floor(src));
    const int i1 = std::min(i0 + 1, in - 1);
    taps[d] = {i0, i1, src - i0};
  }
  return taps;
}

}  // namespace

Image ResizeBilinear(const Image& image, int target_size) {
  if (image.size < 1 || target_size < 1) throw ShapeError("resize needs positive image sizes");
  if (image.size == target_size) return image;
  const auto taps = BilinearTaps(image.size, target_size);
  Image out(target_size);
  for (int ch = 0; ch < Image::kChannels; ++ch)
    for (int r = 0; r < target_size; ++r) {
      const Tap& tr = taps[r];
      for (int c = 0; c < target_size; ++c) {
        const Tap& tc = taps[c];
        const double top = image.at(ch, tr.i0, tc.i0) * (1.0 - tc.w1) + image.at(ch, tr.i0, tc.i1) * tc.w1;
        const double bot = image.at(ch, tr.i1, tc.i0) * (1.0 - tc.w1) + image.at(ch, tr.i1, tc.i1) * tc.w1;
        out.at(ch, r, c) = top * (1.0 - tr.w1) + bot * tr.w1;
      }
    }
  return out;
}

Image ResizeBilinearBackward(const Image& grad, int source_size) {
  if (grad.size == source_size) return grad;
  const auto taps = BilinearTaps(source_size, grad.size);
  Image out(source_size);
  for (int ch = 0; ch < Image::kChannels; ++ch)
    for (int r = 0; r < grad.size; ++r) {
      const Tap& tr = taps[r];
      for (int c = 0; c < grad.size; ++c) {
        const Tap& tc = taps[c];
        const double g = grad.at(ch, r, c);
        out.at(ch, tr.i0, tc.i0) += g * (1.0 - tr.w1) * (1.0 - tc.w1);
        out.at(ch, tr.i0, tc.i1) += g * (1.0 - tr.w1) * tc.w1;
        out.at(ch, tr.i1, tc.i0) += g * tr.w1 * (1.0 - tc.w1);
        out.at(ch, tr.i1, tc.i1) += g * tr.w1 * tc.w1;
      }
    }
  return out;
}

Image RenderExternal(const VoxelGrid& grid, const CameraPose& pose, const RendererPlugin* plugin) {
  if (!plugin)
    throw ConfigError("no external renderer plugin configured; set render.plugin = builtin to use the built-in ray marcher");
  return plugin->Render(grid, pose);
}

namespace {

std::mutex& RegistryMutex() {
  static std::mutex mu;
  return mu;
}

std::map<std::string, RendererFactory>& Registry() {
  static std::map<std::string, RendererFactory> registry = {
      {"builtin", [](const std::string&, const RenderConfig& config) -> std::unique_ptr<RendererPlugin> {
         return std::make_unique<BuiltinRenderer>(config);
       }}};
  return registry;
}

}  // namespace

void RegisterRendererPlugin(const std::string& name, RendererFactory factory) {
  std::lock_guard lock(RegistryMutex());
  Registry()[name] = std::move(factory);
}

std::unique_ptr<RendererPlugin> MakeRendererPlugin(const std::string& name, const std::string& checkpoint,
                                                   const RenderConfig& config) {
  std::lock_guard lock(RegistryMutex());
  auto it = Registry().find(name);
  if (it == Registry().end())
    throw ConfigError("renderer plugin \"" + name + "\" is not registered; use render.plugin = builtin");
  return it->second(checkpoint, config);
}

std::vector<std::string> RegisteredRendererPlugins() {
  std::lock_guard lock(RegistryMutex());
  std::vector<std::string> names;
  for (const auto& [name, _] : Registry()) names.push_back(name);
  return names;
}

}  // namespace zeroforge
