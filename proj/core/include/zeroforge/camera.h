#pragma once

#include <array>
#include <random>

namespace zeroforge {

using Vec3 = std::array<double, 3>;

// Viewing direction on the sphere around the grid center. Azimuth is measured
// in the horizontal x-z plane, polar from the +y (up) axis. Radius is in
// world units where the grid spans [-1, 1]^3 (half-extent 1).
struct CameraPose {
  double azimuth = 0.0;  // [0, 2 pi)
  double polar = 0.0;    // [0, pi]
  double radius = 2.2;

  void Validate() const;
};

// Uniform direction on the sphere by inverse CDF:
// azimuth = 2 pi u, polar = arccos(1 - 2 v).
CameraPose PoseFromUniforms(double u, double v, double radius = 2.2);
CameraPose SampleCamera(std::mt19937_64& rng, double radius = 2.2);

// Pinhole camera looking at the origin.
struct CameraFrame {
  Vec3 eye, forward, right, up;
  double tan_half_fov;

  static constexpr double kVerticalFovDegrees = 40.0;
  static CameraFrame FromPose(const CameraPose& pose);
  // Unit direction of the ray through the center of pixel (row, col).
  Vec3 RayDirection(int row, int col, int image_size) const;
};

}  // namespace zeroforge
