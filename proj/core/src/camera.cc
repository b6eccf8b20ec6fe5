#include "zeroforge/camera.h"

#include <cmath>
#include <numbers>

#include "zeroforge/errors.h"
#include "zeroforge/rng.h"

namespace zeroforge {

namespace {

Vec3 Normalized(Vec3 v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / n, v[1] / n, v[2] / n};
}

}  // namespace

void CameraPose::Validate() const {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  if (!(azimuth >= 0.0 && azimuth < kTwoPi)) throw DomainError("camera azimuth outside [0, 2 pi)");
  if (!(polar >= 0.0 && polar <= std::numbers::pi)) throw DomainError("camera polar angle outside [0, pi]");
  if (!(radius > std::sqrt(3.0))) throw DomainError("camera radius must place the camera outside the grid's bounding sphere");
}

CameraPose PoseFromUniforms(double u, double v, double radius) {
  return CameraPose{2.0 * std::numbers::pi * u, std::acos(1.0 - 2.0 * v), radius};
}

CameraPose SampleCamera(std::mt19937_64& rng, double radius) {
  const double u = UniformUnit(rng);
  const double v = UniformUnit(rng);
  return PoseFromUniforms(u, v, radius);
}

CameraFrame CameraFrame::FromPose(const CameraPose& pose) {
  const double st = std::sin(pose.azimuth), ct = std::cos(pose.azimuth);
  const double sp = std::sin(pose.polar), cp = std::cos(pose.polar);
  CameraFrame f;
  f.eye = {pose.radius * sp * ct, pose.radius * cp, pose.radius * sp * st};
  f.forward = {-sp * ct, -cp, -sp * st};
  // Horizontal tangent of the azimuth circle; well defined at the poles too.
  f.right = {st, 0.0, -ct};
  // up = right x forward
  f.up = Normalized({f.right[1] * f.forward[2] - f.right[2] * f.forward[1],
                     f.right[2] * f.forward[0] - f.right[0] * f.forward[2],
                     f.right[0] * f.forward[1] - f.right[1] * f.forward[0]});
  f.tan_half_fov = std::tan(kVerticalFovDegrees * std::numbers::pi / 360.0);
  return f;
}

Vec3 CameraFrame::RayDirection(int row, int col, int image_size) const {
  const double sx = ((col + 0.5) / image_size * 2.0 - 1.0) * tan_half_fov;
  const double sy = (1.0 - (row + 0.5) / image_size * 2.0) * tan_half_fov;
  return Normalized({forward[0] + sx * right[0] + sy * up[0], forward[1] + sx * right[1] + sy * up[1],
                     forward[2] + sx * right[2] + sy * up[2]});
}

}  // namespace zeroforge
