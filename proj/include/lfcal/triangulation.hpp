#pragma once

#include "lfcal/types.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace lfcal {

/// Linear DLT triangulation (HZ 12.2). Each observation contributes the two
/// rows x p3^T - p1^T and y p3^T - p2^T of A; the point is the right singular
/// vector of the smallest singular value. Throws DegenerateGeometry when the
/// solution is not unique (tied trailing singular values) or lies at infinity.
inline WorldPoint triangulate_point(const std::vector<ProjectionMatrix>& cameras,
                                    const std::vector<PixelPoint>& observations) {
  if (cameras.size() != observations.size())
    fail("SizeMismatch", "camera and observation counts differ");
  if (cameras.size() < 2) fail("InsufficientViews", "triangulation needs at least two views");

  Eigen::MatrixXd a(2 * cameras.size(), 4);
  for (size_t i = 0; i < cameras.size(); ++i) {
    const ProjectionMatrix& p = cameras[i];
    a.row(2 * i) = observations[i].x * p.row(2) - p.row(0);
    a.row(2 * i + 1) = observations[i].y * p.row(2) - p.row(1);
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double scale = std::max(sigma(0), 1.0);
  if (sigma(2) - sigma(3) <= 1e-12 * scale)
    fail("DegenerateGeometry", "triangulation null space is not one-dimensional");

  const Eigen::Vector4d sol = svd.matrixV().col(3);
  if (std::abs(sol(3)) <= 1e-12)
    fail("DegenerateGeometry", "triangulated point lies at infinity");
  return {sol(0) / sol(3), sol(1) / sol(3), sol(2) / sol(3)};
}

}  // namespace lfcal
