#pragma once

#include "lfcal/types.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace lfcal {

/// Skew-symmetric cross-product matrix [v]_x.
inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

/// Rodrigues formula R = I + sin(t)/t [r]_x + (1-cos(t))/t^2 [r]_x^2.
/// Taylor fallbacks keep the coefficients smooth through t = 0.
inline Mat3 rodrigues_to_matrix(const Vec3& rvec) {
  const double theta2 = rvec.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a, b;  // sin(t)/t and (1-cos(t))/t^2
  if (theta < 1e-8) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  const Mat3 k = skew(rvec);
  return Mat3::Identity() + a * k + b * (k * k);
}

/// Inverse Rodrigues. Requires an orthonormal right-handed matrix
/// (tolerance 1e-6 on R^T R and det); throws NotARotation otherwise.
/// Returns the canonical vector with angle in [0, pi].
inline Vec3 matrix_to_rodrigues(const Mat3& rot) {
  const double ortho_err = (rot.transpose() * rot - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho_err > 1e-6 || rot.determinant() < 0.0)
    fail("NotARotation", "matrix is not orthonormal with determinant +1");

  const double cos_theta = std::clamp((rot.trace() - 1.0) / 2.0, -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  // vee(R - R^T) = 2 sin(t) * axis
  const Vec3 vee(rot(2, 1) - rot(1, 2), rot(0, 2) - rot(2, 0), rot(1, 0) - rot(0, 1));

  const double sin_theta = std::sin(theta);
  if (sin_theta >= 1e-6) return (theta / (2.0 * sin_theta)) * vee;

  if (theta < 1e-6) {
    // Near identity: R - R^T ~ 2 [r]_x, so vee / 2 is already the vector.
    return 0.5 * vee;
  }

  // Near pi: sin(t) ~ 0, recover the axis from the symmetric part.
  // (R + R^T)/2 = I + (1 - cos t)([a]_x^2) with unit axis a, so
  // ((R + R^T)/2 + I)/2 -> a a^T as t -> pi.
  const Mat3 outer = ((rot + rot.transpose()) / 2.0 + Mat3::Identity()) / 2.0;
  int best = 0;
  outer.diagonal().maxCoeff(&best);
  Vec3 axis = outer.col(best) / std::sqrt(outer(best, best));
  // The sign of the axis is free at exactly pi; nearby, vee fixes it.
  if (axis.dot(vee) < 0.0) axis = -axis;
  return theta * axis;
}

/// Right Jacobian of SO(3): d/dr of the exponential map at r, so that
/// R(r + dr) ~ R(r) exp([J_r dr]_x).
inline Mat3 so3_right_jacobian(const Vec3& rvec) {
  const double theta2 = rvec.squaredNorm();
  const double theta = std::sqrt(theta2);
  double c1, c2;  // (1-cos t)/t^2 and (t - sin t)/t^3
  if (theta < 1e-5) {
    c1 = 0.5 - theta2 / 24.0;
    c2 = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    c1 = (1.0 - std::cos(theta)) / theta2;
    c2 = (theta - std::sin(theta)) / (theta2 * theta);
  }
  const Mat3 k = skew(rvec);
  return Mat3::Identity() - c1 * k + c2 * (k * k);
}

/// d(R(r) X)/dr, a 3x3 matrix (Gallego & Yezzi, J Math Imaging Vis 2015).
/// Using the right Jacobian form: d(R X)/dr = -R [X]_x J_r(r).
inline Mat3 rotate_point_jacobian(const Vec3& rvec, const Vec3& point) {
  const Mat3 rot = rodrigues_to_matrix(rvec);
  return -rot * skew(point) * so3_right_jacobian(rvec);
}

/// Same Jacobian when R(r) is already available.
inline Mat3 rotate_point_jacobian(const Vec3& rvec, const Mat3& rot, const Vec3& point) {
  return -rot * skew(point) * so3_right_jacobian(rvec);
}

}  // namespace lfcal
