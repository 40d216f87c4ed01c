#pragma once

#include "lfcal/calibrate.hpp"
#include "lfcal/distortion.hpp"
#include "lfcal/parallel.hpp"
#include "lfcal/rotation.hpp"
#include "lfcal/types.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <utility>
#include <vector>

namespace lfcal {

/// Denominator rule for averaging the grid's rotation vectors. The sum always
/// runs over all N views; the reference contributes a zero vector, so dividing
/// by N-1 is the mean over non-reference views while N is the plain mean.
enum class RotationMeanRule { exclude_reference, all_views };

/// Rotation-vector spread beyond which averaging-based rectification becomes
/// questionable; callers should surface a warning, not abort.
inline constexpr double kRotationSpreadWarning = 0.1;  // radians

/// Common rectified camera plus per-view rectified extrinsics.
/// per_view_p[i] maps points in view i's ORIGINAL camera frame to rectified
/// pixels: the rectifying rotation r_bar[i] carries that frame onto the shared
/// rectified orientation.
struct RectificationResult {
  IntrinsicMatrix k_r;
  Mat3 r_r = Mat3::Identity();
  double t_r_x = 0.0;
  double t_r_y = 0.0;
  std::vector<ProjectionMatrix> per_view_p;
  std::vector<Mat3> per_view_r_bar;
  std::vector<Vec3> per_view_t_bar;
  // Largest deviation of any view's rotation vector from the grid mean.
  // Compare against kRotationSpreadWarning.
  double rotation_spread = 0.0;
};

/// Destination -> source remap table, row-major over destination pixels.
/// Entries whose source falls outside the sampleable area are (-1, -1).
struct LookupTable {
  int width = 0;
  int height = 0;
  std::vector<PixelPoint> map;

  static constexpr double kSentinel = -1.0;

  const PixelPoint& at(int x, int y) const { return map[static_cast<size_t>(y) * width + x]; }
  static bool is_sentinel(const PixelPoint& p) { return p.x == kSentinel && p.y == kSentinel; }
};

/// Shared intrinsics for the rectified views: focal lengths are arithmetic
/// means over the views, the principal point is the image center, skew is 0.
inline IntrinsicMatrix common_intrinsics(const std::vector<IntrinsicMatrix>& per_view, int width,
                                         int height) {
  if (per_view.empty()) fail("EmptyInput", "no per-view intrinsics to average");
  IntrinsicMatrix k_r;
  k_r.fx = 0.0;
  k_r.fy = 0.0;
  for (const IntrinsicMatrix& k : per_view) {
    k_r.fx += k.fx;
    k_r.fy += k.fy;
  }
  k_r.fx /= static_cast<double>(per_view.size());
  k_r.fy /= static_cast<double>(per_view.size());
  k_r.cx = width / 2.0;
  k_r.cy = height / 2.0;
  k_r.skew = 0.0;
  return k_r;
}

/// Mean rotation vector over the grid. `rvecs` covers all N views including
/// the (zero) reference vector; see RotationMeanRule for the denominator.
inline Vec3 common_rotation_vector(const std::vector<Vec3>& rvecs,
                                   RotationMeanRule rule = RotationMeanRule::exclude_reference) {
  if (rvecs.size() < 2) fail("EmptyInput", "rotation averaging needs at least two views");
  Vec3 sum = Vec3::Zero();
  for (const Vec3& r : rvecs) sum += r;
  const double denom = static_cast<double>(
      rule == RotationMeanRule::exclude_reference ? rvecs.size() - 1 : rvecs.size());
  return sum / denom;
}

inline Mat3 common_rotation(const std::vector<Vec3>& rvecs,
                            RotationMeanRule rule = RotationMeanRule::exclude_reference) {
  return rodrigues_to_matrix(common_rotation_vector(rvecs, rule));
}

/// Per-axis one-step baseline implied by view i's translation relative to the
/// reference: each component is divided by the (signed) grid offset along its
/// axis, and vanishes for views sharing the reference row or column. The z
/// component is dropped entirely.
inline Vec3 per_view_relative_translation(const Vec3& t_o, int view, const ViewGrid& grid) {
  if (view < 0 || view >= grid.size()) fail("InvalidGrid", "view index outside the grid");
  const int db = grid.ref_b - grid.col_of(view);
  const int da = grid.ref_a - grid.row_of(view);
  Vec3 t_v = Vec3::Zero();
  if (db != 0) t_v.x() = t_o.x() / static_cast<double>(db);
  if (da != 0) t_v.y() = t_o.y() / static_cast<double>(da);
  return t_v;
}

/// Common per-step translation: per-axis mean over the nonzero entries only
/// (views in the reference column contribute nothing to x, the reference row
/// nothing to y). Throws DegenerateGrid when an axis has no samples at all,
/// e.g. a single-row or single-column grid.
inline std::pair<double, double> common_translation(const std::vector<Vec3>& t_v) {
  double sum_x = 0.0, sum_y = 0.0;
  int n_x = 0, n_y = 0;
  for (const Vec3& t : t_v) {
    if (t.x() != 0.0) {
      sum_x += t.x();
      ++n_x;
    }
    if (t.y() != 0.0) {
      sum_y += t.y();
      ++n_y;
    }
  }
  if (n_x == 0 || n_y == 0)
    fail("DegenerateGrid", "grid provides no baseline sample along one axis");
  return {sum_x / n_x, sum_y / n_y};
}

/// Ideal translation of view i in the rectified rig: the common per-step
/// baseline scaled by the view's signed grid offset from the reference.
inline Vec3 per_view_target_translation(double t_r_x, double t_r_y, int view,
                                        const ViewGrid& grid) {
  if (view < 0 || view >= grid.size()) fail("InvalidGrid", "view index outside the grid");
  const int db = grid.ref_b - grid.col_of(view);
  const int da = grid.ref_a - grid.row_of(view);
  return {t_r_x * db, t_r_y * da, 0.0};
}

/// Assembles the full rectified rig from a calibration: common intrinsics and
/// rotation, grid-proportional translations, and per-view projections
/// P_i = K_r [R_bar_i | t_bar_i] with R_bar_i = R_r R_i^T and
/// t_bar_i = R_bar_i t_p_i.
inline RectificationResult rectified_projections(
    const LightFieldCalibration& calib, int width, int height,
    RotationMeanRule rule = RotationMeanRule::exclude_reference) {
  calib.grid.validate();
  const int n = calib.grid.size();
  if (static_cast<int>(calib.per_view.size()) != n ||
      static_cast<int>(calib.poses_rel_reference.size()) != n)
    fail("SizeMismatch", "calibration view lists do not match the grid");

  RectificationResult out;

  std::vector<IntrinsicMatrix> ks;
  ks.reserve(n);
  for (const ViewCalibration& vc : calib.per_view) ks.push_back(vc.k);
  out.k_r = common_intrinsics(ks, width, height);

  std::vector<Vec3> rvecs;
  rvecs.reserve(n);
  for (const ViewPose& pose : calib.poses_rel_reference) rvecs.push_back(pose.rvec);
  const Vec3 r_r_vec = common_rotation_vector(rvecs, rule);
  out.r_r = rodrigues_to_matrix(r_r_vec);

  Vec3 mean_rvec = Vec3::Zero();
  for (const Vec3& r : rvecs) mean_rvec += r;
  mean_rvec /= static_cast<double>(n);
  for (const Vec3& r : rvecs)
    out.rotation_spread = std::max(out.rotation_spread, (r - mean_rvec).norm());

  std::vector<Vec3> t_v;
  t_v.reserve(n);
  for (int i = 0; i < n; ++i)
    t_v.push_back(per_view_relative_translation(calib.poses_rel_reference[i].tvec, i, calib.grid));
  std::tie(out.t_r_x, out.t_r_y) = common_translation(t_v);

  out.per_view_p.resize(n);
  out.per_view_r_bar.resize(n);
  out.per_view_t_bar.resize(n);
  for (int i = 0; i < n; ++i) {
    const Vec3 t_p = per_view_target_translation(out.t_r_x, out.t_r_y, i, calib.grid);
    const Mat3 r_bar = out.r_r * rodrigues_to_matrix(rvecs[i]).transpose();
    out.per_view_r_bar[i] = r_bar;
    out.per_view_t_bar[i] = r_bar * t_p;
    ProjectionMatrix p;
    p.block<3, 3>(0, 0) = r_bar;
    p.col(3) = out.per_view_t_bar[i];
    out.per_view_p[i] = out.k_r.matrix() * p;
  }
  return out;
}

/// Remap table for one view: each rectified (destination) pixel is carried
/// back through the rectifying homography K_i R_bar_i^T K_r^-1 and then
/// forward through the view's distortion, giving the sub-pixel source
/// position in the original image. Sources outside the sampleable area
/// [0, w-1] x [0, h-1] (or behind the rotated image plane) get the sentinel.
/// The original pose is accepted for interface completeness: a remap can
/// realize the orientation and intrinsic change, but not the move of the
/// camera center, so the translation cannot enter the table.
inline LookupTable build_lut(const ViewCalibration& view_calib, const ViewPose& /*original_pose*/,
                             const Mat3& r_bar, const IntrinsicMatrix& k_r, int width, int height) {
  if (width < 1 || height < 1) fail("InvalidImage", "lookup table dimensions must be positive");
  view_calib.k.validate();
  LookupTable lut;
  lut.width = width;
  lut.height = height;
  lut.map.assign(static_cast<size_t>(width) * height, {LookupTable::kSentinel, LookupTable::kSentinel});

  const Mat3 h = view_calib.k.matrix() * r_bar.transpose() * k_r.matrix().inverse();
  // Roundoff skin: sources this close to the border are clamped onto it
  // rather than dropped, so an identity remap keeps every pixel.
  const double eps = 1e-9;
  parallel_for(height, [&](int y) {
    for (int x = 0; x < width; ++x) {
      const Vec3 s = h * Vec3(x, y, 1.0);
      if (s.z() <= 1e-12) continue;  // destination ray leaves the source image plane
      PixelPoint src{s.x() / s.z(), s.y() / s.z()};
      src = apply_distortion(view_calib.d, src);
      if (src.x < -eps || src.x > width - 1.0 + eps || src.y < -eps || src.y > height - 1.0 + eps)
        continue;
      src.x = std::min(std::max(src.x, 0.0), width - 1.0);
      src.y = std::min(std::max(src.y, 0.0), height - 1.0);
      lut.map[static_cast<size_t>(y) * width + x] = src;
    }
  });
  return lut;
}

/// Fraction of destination pixels whose source fell inside the image; the
/// complement is the field of view lost to the rectifying rotation.
inline double retained_fraction(const LookupTable& lut) {
  if (lut.map.empty()) return 0.0;
  size_t kept = 0;
  for (const PixelPoint& p : lut.map)
    if (!LookupTable::is_sentinel(p)) ++kept;
  return static_cast<double>(kept) / static_cast<double>(lut.map.size());
}

}  // namespace lfcal
