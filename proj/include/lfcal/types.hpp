#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace lfcal {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;

/// Domain error with a stable machine-readable kind, e.g. "InsufficientFrames".
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

[[noreturn]] inline void fail(std::string kind, const std::string& message) {
  throw Error(std::move(kind), message);
}

struct PixelPoint {
  double x = 0.0;
  double y = 0.0;

  Vec2 vec() const { return {x, y}; }
  static PixelPoint from(const Vec2& v) { return {v.x(), v.y()}; }
};

struct WorldPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 vec() const { return {x, y, z}; }
  static WorldPoint from(const Vec3& v) { return {v.x(), v.y(), v.z()}; }
};

inline double distance(const PixelPoint& a, const PixelPoint& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Pinhole intrinsics. Skew is carried for completeness but stays 0 in
/// every estimation path.
struct IntrinsicMatrix {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double skew = 0.0;

  Mat3 matrix() const {
    Mat3 k;
    k << fx, skew, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) fail("InvalidIntrinsics", "focal lengths must be positive");
    if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(skew))
      fail("InvalidIntrinsics", "principal point and skew must be finite");
  }
};

/// Two-coefficient radial model with an explicit distortion center.
/// k1 = k2 = 0 is the identity map.
struct RadialDistortion {
  double k1 = 0.0;
  double k2 = 0.0;
  double center_x = 0.0;
  double center_y = 0.0;

  bool is_identity() const { return k1 == 0.0 && k2 == 0.0; }

  /// Center defaults to the principal point when not set explicitly.
  static RadialDistortion centered(double k1, double k2, const IntrinsicMatrix& K) {
    return {k1, k2, K.cx, K.cy};
  }

  void validate() const {
    if (!std::isfinite(k1) || !std::isfinite(k2) || !std::isfinite(center_x) ||
        !std::isfinite(center_y))
      fail("InvalidDistortion", "all distortion fields must be finite");
  }
};

/// Rodrigues rotation vector plus translation of one view w.r.t. the scene
/// or reference origin.
struct ViewPose {
  Vec3 rvec = Vec3::Zero();
  Vec3 tvec = Vec3::Zero();

  bool is_identity() const { return rvec.isZero(0.0) && tvec.isZero(0.0); }
};

/// 3x4 projection matrix P = K [R|t].
using ProjectionMatrix = Mat34;

/// Spatial layout of the light-field views. Views are indexed row-major:
/// i = a_bar * cols_b + b_bar, with a_bar growing downward and b_bar rightward.
struct ViewGrid {
  int rows_a = 0;
  int cols_b = 0;
  int ref_a = 0;
  int ref_b = 0;

  int size() const { return rows_a * cols_b; }
  int reference_index() const { return ref_a * cols_b + ref_b; }

  int row_of(int view) const { return view / cols_b; }
  int col_of(int view) const { return view % cols_b; }
  int index_of(int a_bar, int b_bar) const { return a_bar * cols_b + b_bar; }

  void validate() const {
    if (rows_a < 1 || cols_b < 1) fail("InvalidGrid", "grid dimensions must be positive");
    if (ref_a < 0 || ref_a >= rows_a || ref_b < 0 || ref_b >= cols_b)
      fail("InvalidGrid", "reference coordinates outside the grid");
  }
};

}  // namespace lfcal
