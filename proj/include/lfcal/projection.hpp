#pragma once

#include "lfcal/distortion.hpp"
#include "lfcal/rotation.hpp"
#include "lfcal/types.hpp"

#include <cmath>
#include <vector>

namespace lfcal {

/// P = K [R|t] from intrinsics and a Rodrigues pose.
inline ProjectionMatrix projection_matrix(const IntrinsicMatrix& intr, const ViewPose& pose) {
  ProjectionMatrix p;
  p.leftCols<3>() = rodrigues_to_matrix(pose.rvec);
  p.col(3) = pose.tvec;
  return intr.matrix() * p;
}

/// Homogeneous pinhole projection m ~ P M. Throws DegenerateDepth when the
/// point lands on the camera plane (|w| <= 1e-12).
inline PixelPoint project_point(const ProjectionMatrix& p, const WorldPoint& point) {
  const Eigen::Vector4d hom(point.x, point.y, point.z, 1.0);
  const Vec3 m = p * hom;
  if (std::abs(m.z()) <= 1e-12) fail("DegenerateDepth", "projected point has zero depth");
  return {m.x() / m.z(), m.y() / m.z()};
}

/// Full camera: pinhole projection followed by radial distortion.
inline PixelPoint project_with_distortion(const IntrinsicMatrix& intr, const ViewPose& pose,
                                          const RadialDistortion& dist, const WorldPoint& point) {
  return apply_distortion(dist, project_point(projection_matrix(intr, pose), point));
}

/// Root mean square of per-point reprojection distances. Observation and
/// prediction lists must be index-aligned and equally sized.
inline double reprojection_rms(const std::vector<PixelPoint>& observed,
                               const std::vector<PixelPoint>& predicted) {
  if (observed.size() != predicted.size())
    fail("SizeMismatch", "observed and predicted lists differ in length");
  if (observed.empty()) fail("EmptyInput", "cannot take RMS of zero points");
  double sum = 0.0;
  for (size_t i = 0; i < observed.size(); ++i) {
    const double dx = observed[i].x - predicted[i].x;
    const double dy = observed[i].y - predicted[i].y;
    sum += dx * dx + dy * dy;
  }
  return std::sqrt(sum / static_cast<double>(observed.size()));
}

}  // namespace lfcal
