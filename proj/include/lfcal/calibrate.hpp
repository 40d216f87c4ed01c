#pragma once

#include "lfcal/distortion.hpp"
#include "lfcal/homography.hpp"
#include "lfcal/levenberg_marquardt.hpp"
#include "lfcal/parallel.hpp"
#include "lfcal/pattern.hpp"
#include "lfcal/projection.hpp"
#include "lfcal/rotation.hpp"
#include "lfcal/triangulation.hpp"
#include "lfcal/types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <vector>

namespace lfcal {

/// One view's intrinsic calibration and its monocular reprojection RMS.
struct ViewCalibration {
  IntrinsicMatrix k;
  RadialDistortion d;
  double rms_mono = 0.0;
};

/// Full light-field calibration: per-view intrinsics plus per-view poses
/// relative to the reference view, whose own pose is exactly zero.
struct LightFieldCalibration {
  ViewGrid grid;
  std::vector<ViewCalibration> per_view;
  std::vector<ViewPose> poses_rel_reference;
  double rms_pnp = 0.0;
};

namespace detail {

/// Zhang's conic constraint row v_ij for one homography (columns h_i, h_j),
/// parameterizing the symmetric matrix B = K^-T K^-1 as
/// b = (B11, B12, B22, B13, B23, B33).
inline Eigen::Matrix<double, 6, 1> conic_row(const Mat3& h, int i, int j) {
  const Vec3 hi = h.col(i);
  const Vec3 hj = h.col(j);
  Eigen::Matrix<double, 6, 1> v;
  v << hi(0) * hj(0), hi(0) * hj(1) + hi(1) * hj(0), hi(1) * hj(1), hi(2) * hj(0) + hi(0) * hj(2),
      hi(2) * hj(1) + hi(1) * hj(2), hi(2) * hj(2);
  return v;
}

/// Closed-form intrinsics from per-frame pattern homographies via the image
/// of the absolute conic, with a zero-skew constraint row appended.
inline IntrinsicMatrix zhang_intrinsics(const std::vector<Mat3>& homographies) {
  Eigen::MatrixXd v(2 * homographies.size() + 1, 6);
  for (size_t f = 0; f < homographies.size(); ++f) {
    Mat3 h = homographies[f];
    h /= h.norm();
    v.row(2 * f) = conic_row(h, 0, 1).transpose();
    v.row(2 * f + 1) = (conic_row(h, 0, 0) - conic_row(h, 1, 1)).transpose();
  }
  v.row(2 * homographies.size()) << 0, 1, 0, 0, 0, 0;  // skew = 0

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(v, Eigen::ComputeFullV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  // The solution itself lives in the null space, so conditioning is judged
  // on the second-smallest singular value: near-parallel pattern planes
  // leave fewer than 5 independent constraints.
  if (sigma(4) <= 0.0 || sigma(0) / sigma(4) > 1e10)
    fail("DegenerateOrientations", "pattern orientations do not constrain the intrinsics");

  Eigen::VectorXd b = svd.matrixV().col(5);
  if (b(0) < 0.0) b = -b;

  const double b11 = b(0), b12 = b(1), b22 = b(2), b13 = b(3), b23 = b(4), b33 = b(5);
  const double denom = b11 * b22 - b12 * b12;
  if (b11 <= 0.0 || b22 <= 0.0 || denom <= 0.0)
    fail("DegenerateOrientations", "recovered conic is not positive definite");

  const double v0 = (b12 * b13 - b11 * b23) / denom;
  const double lambda = b33 - (b13 * b13 + v0 * (b12 * b13 - b11 * b23)) / b11;
  if (lambda / b11 <= 0.0 || lambda * b11 / denom <= 0.0)
    fail("DegenerateOrientations", "recovered conic is not positive definite");

  IntrinsicMatrix k;
  k.fx = std::sqrt(lambda / b11);
  k.fy = std::sqrt(lambda * b11 / denom);
  k.cx = -b13 * k.fx * k.fx / lambda;
  k.cy = v0;
  k.skew = 0.0;
  return k;
}

/// Pose of a plane with known metric coordinates from its homography
/// (world plane (X,Y,0) -> image), given intrinsics. Zhang Appendix C.
inline ViewPose pose_from_plane_homography(const Mat3& h, const IntrinsicMatrix& k) {
  const Mat3 kinv = k.matrix().inverse();
  Vec3 r1 = kinv * h.col(0);
  Vec3 r2 = kinv * h.col(1);
  Vec3 t = kinv * h.col(2);
  const double scale = 2.0 / (r1.norm() + r2.norm());
  r1 *= scale;
  r2 *= scale;
  t *= scale;
  if (t.z() < 0.0) {
    r1 = -r1;
    r2 = -r2;
    t = -t;
  }
  Mat3 approx;
  approx.col(0) = r1;
  approx.col(1) = r2;
  approx.col(2) = r1.cross(r2);
  // Nearest rotation in Frobenius norm.
  Eigen::JacobiSVD<Mat3> svd(approx, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 rot = svd.matrixU() * svd.matrixV().transpose();
  if (rot.determinant() < 0.0)
    rot = svd.matrixU() * Vec3(1, 1, -1).asDiagonal() * svd.matrixV().transpose();

  ViewPose pose;
  pose.rvec = matrix_to_rodrigues(rot);
  pose.tvec = t;
  return pose;
}

/// 2x2 Jacobian of the distortion map at the ideal point (du, dv) from the
/// center, with gain g and dgain/d(rho^2) = h.
inline Eigen::Matrix2d distortion_jacobian(double du, double dv, double g, double h) {
  Eigen::Matrix2d d;
  d << g + 2.0 * h * du * du, 2.0 * h * du * dv, 2.0 * h * du * dv, g + 2.0 * h * dv * dv;
  return d;
}

struct FrameCorners {
  std::vector<PixelPoint> corners;
};

/// Shared state for the per-view joint optimization over intrinsics,
/// distortion, and per-frame pattern poses.
struct MonoProblem {
  std::vector<WorldPoint> world;
  std::vector<FrameCorners> frames;

  int param_count() const { return 6 + 6 * static_cast<int>(frames.size()); }

  // x = [fx, fy, cx, cy, k1, k2, (rvec, tvec) per frame].
  double cost(const Eigen::VectorXd& x) const {
    double total = 0.0;
    for (size_t f = 0; f < frames.size(); ++f) {
      const Vec3 rvec = x.segment<3>(6 + 6 * f);
      const Vec3 tvec = x.segment<3>(6 + 6 * f + 3);
      const Mat3 rot = rodrigues_to_matrix(rvec);
      for (size_t c = 0; c < world.size(); ++c) {
        const Vec3 xc = rot * world[c].vec() + tvec;
        if (xc.z() <= 1e-9) return std::numeric_limits<double>::infinity();
        const double u = x(0) * xc.x() / xc.z() + x(2);
        const double v = x(1) * xc.y() / xc.z() + x(3);
        const double du = u - x(2), dv = v - x(3);
        const double rho2 = du * du + dv * dv;
        const double g = 1.0 + rho2 * (x(4) + rho2 * x(5));
        const double ex = x(2) + du * g - frames[f].corners[c].x;
        const double ey = x(3) + dv * g - frames[f].corners[c].y;
        total += ex * ex + ey * ey;
      }
    }
    return total;
  }

  double build(const Eigen::VectorXd& x, Eigen::MatrixXd& hess, Eigen::VectorXd& grad) const {
    const int n = param_count();
    hess.setZero(n, n);
    grad.setZero(n);
    double total = 0.0;

    Eigen::Matrix<double, 2, 12> jac;  // columns: fx fy cx cy k1 k2 rvec tvec
    std::array<int, 12> cols{};
    for (int i = 0; i < 6; ++i) cols[i] = i;

    for (size_t f = 0; f < frames.size(); ++f) {
      const int base = 6 + 6 * static_cast<int>(f);
      for (int i = 0; i < 6; ++i) cols[6 + i] = base + i;
      const Vec3 rvec = x.segment<3>(base);
      const Vec3 tvec = x.segment<3>(base + 3);
      const Mat3 rot = rodrigues_to_matrix(rvec);
      const Mat3 jr = so3_right_jacobian(rvec);

      for (size_t c = 0; c < world.size(); ++c) {
        const Vec3 m = world[c].vec();
        const Vec3 xc = rot * m + tvec;
        if (xc.z() <= 1e-9) return std::numeric_limits<double>::infinity();
        const double inv_z = 1.0 / xc.z();
        const double xhat = xc.x() * inv_z;
        const double yhat = xc.y() * inv_z;
        const double u = x(0) * xhat + x(2);
        const double v = x(1) * yhat + x(3);
        const double du = u - x(2), dv = v - x(3);
        const double rho2 = du * du + dv * dv;
        const double g = 1.0 + rho2 * (x(4) + rho2 * x(5));
        const double gh = x(4) + 2.0 * x(5) * rho2;

        const Eigen::Vector2d res(x(2) + du * g - frames[f].corners[c].x,
                                  x(3) + dv * g - frames[f].corners[c].y);
        total += res.squaredNorm();

        const Eigen::Matrix2d dist_jac = distortion_jacobian(du, dv, g, gh);

        Eigen::Matrix<double, 2, 3> pin;  // d(u,v)/dXc
        pin << x(0) * inv_z, 0.0, -x(0) * xhat * inv_z, 0.0, x(1) * inv_z, -x(1) * yhat * inv_z;
        const Eigen::Matrix<double, 2, 3> outer = dist_jac * pin;
        const Mat3 drot = -rot * skew(m) * jr;  // dXc/drvec

        jac.col(0) = dist_jac.col(0) * xhat;         // fx
        jac.col(1) = dist_jac.col(1) * yhat;         // fy
        jac.col(2) = Eigen::Vector2d(1.0, 0.0);      // cx (center rides along)
        jac.col(3) = Eigen::Vector2d(0.0, 1.0);      // cy
        jac.col(4) = Eigen::Vector2d(du, dv) * rho2; // k1
        jac.col(5) = Eigen::Vector2d(du, dv) * rho2 * rho2;  // k2
        jac.block<2, 3>(0, 6) = outer * drot;
        jac.block<2, 3>(0, 9) = outer;

        for (int a = 0; a < 12; ++a) {
          grad(cols[a]) += jac.col(a).dot(res);
          for (int b = a; b < 12; ++b) {
            const double val = jac.col(a).dot(jac.col(b));
            hess(cols[a], cols[b]) += val;
            if (a != b) hess(cols[b], cols[a]) += val;
          }
        }
      }
    }
    return total;
  }
};

}  // namespace detail

/// Intrinsic calibration of one view from several pattern placements:
/// closed-form initialization from homographies (image of the absolute
/// conic), distortion started at zero, then joint Levenberg-Marquardt over
/// {fx, fy, cx, cy, k1, k2, per-frame poses}. The distortion center is tied
/// to the principal point. Throws InsufficientFrames (<3 placements),
/// DegenerateOrientations, NoConvergence.
inline ViewCalibration calibrate_view(const std::vector<PatternObservation>& observations,
                                      const CheckerboardSpec& spec, int width, int height) {
  spec.validate();
  if (observations.size() < 3)
    fail("InsufficientFrames", "intrinsic calibration needs at least 3 pattern placements");
  (void)width;
  (void)height;

  const std::vector<WorldPoint> world = pattern_world_points(spec);
  std::vector<PixelPoint> world_xy;
  world_xy.reserve(world.size());
  for (const auto& w : world) world_xy.push_back({w.x, w.y});

  std::vector<Mat3> homographies;
  homographies.reserve(observations.size());
  for (const auto& obs : observations) {
    if (static_cast<int>(obs.corners.size()) != spec.corner_count())
      fail("SizeMismatch", "corner count does not match the pattern");
    homographies.push_back(estimate_homography(world_xy, obs.corners));
  }

  const IntrinsicMatrix k0 = detail::zhang_intrinsics(homographies);

  detail::MonoProblem problem;
  problem.world = world;
  problem.frames.resize(observations.size());
  for (size_t f = 0; f < observations.size(); ++f)
    problem.frames[f].corners = observations[f].corners;

  Eigen::VectorXd x(problem.param_count());
  x(0) = k0.fx;
  x(1) = k0.fy;
  x(2) = k0.cx;
  x(3) = k0.cy;
  x(4) = 0.0;
  x(5) = 0.0;
  for (size_t f = 0; f < observations.size(); ++f) {
    const ViewPose pose = detail::pose_from_plane_homography(homographies[f], k0);
    x.segment<3>(6 + 6 * f) = pose.rvec;
    x.segment<3>(6 + 6 * f + 3) = pose.tvec;
  }

  const LmSummary summary = lm_minimize(
      x,
      [&](const Eigen::VectorXd& p, Eigen::MatrixXd& h, Eigen::VectorXd& g) {
        return problem.build(p, h, g);
      },
      [&](const Eigen::VectorXd& p) { return problem.cost(p); });
  if (!std::isfinite(summary.final_cost))
    fail("NoConvergence", "intrinsic refinement did not reach a finite cost");

  ViewCalibration result;
  result.k.fx = x(0);
  result.k.fy = x(1);
  result.k.cx = x(2);
  result.k.cy = x(3);
  result.k.skew = 0.0;
  result.d = RadialDistortion{x(4), x(5), x(2), x(3)};
  const int total_corners = static_cast<int>(observations.size() * world.size());
  result.rms_mono = std::sqrt(summary.final_cost / total_corners);
  return result;
}

/// Camera pose from known 3D points and their (distorted) image
/// observations. Observations are undistorted first; the initial pose comes
/// from homography decomposition when the points are coplanar and from the
/// 6-point DLT otherwise, then Levenberg-Marquardt refines all 6 pose
/// parameters against the undistorted observations. Throws
/// InsufficientPoints (<6).
inline ViewPose solve_pnp(const std::vector<WorldPoint>& world,
                          const std::vector<PixelPoint>& image, const IntrinsicMatrix& k,
                          const RadialDistortion& d) {
  if (world.size() != image.size()) fail("SizeMismatch", "point lists differ in length");
  const int n = static_cast<int>(world.size());
  if (n < 6) fail("InsufficientPoints", "PnP needs at least 6 correspondences");

  std::vector<PixelPoint> undist;
  undist.reserve(n);
  for (const auto& p : image) undist.push_back(remove_distortion(d, p));

  // Planarity check via the scatter matrix of the world points.
  Vec3 centroid = Vec3::Zero();
  for (const auto& w : world) centroid += w.vec();
  centroid /= n;
  Mat3 scatter = Mat3::Zero();
  for (const auto& w : world) {
    const Vec3 delta = w.vec() - centroid;
    scatter += delta * delta.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  const Vec3 evals = eig.eigenvalues();  // ascending

  ViewPose init;
  if (evals(0) <= 1e-10 * std::max(evals(2), 1e-300)) {
    // Coplanar points: express them in an in-plane frame and decompose the
    // plane-to-image homography.
    const Vec3 e1 = eig.eigenvectors().col(2);
    const Vec3 e2 = eig.eigenvectors().col(1);
    Vec3 e3 = e1.cross(e2);
    Mat3 frame;
    frame.col(0) = e1;
    frame.col(1) = e2;
    frame.col(2) = e3;

    std::vector<PixelPoint> plane_xy;
    plane_xy.reserve(n);
    for (const auto& w : world) {
      const Vec3 delta = w.vec() - centroid;
      plane_xy.push_back({e1.dot(delta), e2.dot(delta)});
    }
    const Mat3 h = estimate_homography(plane_xy, undist);
    const ViewPose plane_pose = detail::pose_from_plane_homography(h, k);

    const Mat3 r_plane = rodrigues_to_matrix(plane_pose.rvec);
    const Mat3 r_world = r_plane * frame.transpose();
    init.rvec = matrix_to_rodrigues(r_world);
    init.tvec = plane_pose.tvec - r_world * centroid;
  } else {
    // General 3D points: DLT resectioning with known intrinsics.
    Eigen::MatrixXd a(2 * n, 12);
    for (int i = 0; i < n; ++i) {
      const Vec3 m = world[i].vec();
      const double u = undist[i].x, v = undist[i].y;
      a.row(2 * i) << m.x(), m.y(), m.z(), 1, 0, 0, 0, 0, -u * m.x(), -u * m.y(), -u * m.z(), -u;
      a.row(2 * i + 1) << 0, 0, 0, 0, m.x(), m.y(), m.z(), 1, -v * m.x(), -v * m.y(), -v * m.z(),
          -v;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
    const Eigen::VectorXd pv = svd.matrixV().col(11);
    ProjectionMatrix p;
    p << pv(0), pv(1), pv(2), pv(3), pv(4), pv(5), pv(6), pv(7), pv(8), pv(9), pv(10), pv(11);

    Mat34 metric = k.matrix().inverse() * p;
    double scale = metric.block<1, 3>(2, 0).norm();
    if (scale <= 1e-300) fail("DegenerateGeometry", "PnP projection collapsed");
    // Fix the sign so the points sit in front of the camera.
    const double depth = metric.row(2) * Eigen::Vector4d(centroid.x(), centroid.y(), centroid.z(), 1.0);
    if (depth < 0.0) scale = -scale;
    metric /= scale;

    Eigen::JacobiSVD<Mat3> orth(metric.leftCols<3>(), Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 rot = orth.matrixU() * orth.matrixV().transpose();
    if (rot.determinant() < 0.0)
      rot = orth.matrixU() * Vec3(1, 1, -1).asDiagonal() * orth.matrixV().transpose();
    init.rvec = matrix_to_rodrigues(rot);
    init.tvec = metric.col(3);
  }

  // LM refinement of the 6 pose parameters in undistorted pixel space.
  const auto cost_fn = [&](const Eigen::VectorXd& p) -> double {
    const Mat3 rot = rodrigues_to_matrix(p.head<3>());
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const Vec3 xc = rot * world[i].vec() + p.tail<3>();
      if (xc.z() <= 1e-9) return std::numeric_limits<double>::infinity();
      const double u = k.fx * xc.x() / xc.z() + k.cx;
      const double v = k.fy * xc.y() / xc.z() + k.cy;
      const double ex = u - undist[i].x, ey = v - undist[i].y;
      total += ex * ex + ey * ey;
    }
    return total;
  };
  const auto build = [&](const Eigen::VectorXd& p, Eigen::MatrixXd& hess,
                         Eigen::VectorXd& grad) -> double {
    hess.setZero(6, 6);
    grad.setZero(6);
    const Vec3 rvec = p.head<3>();
    const Mat3 rot = rodrigues_to_matrix(rvec);
    const Mat3 jr = so3_right_jacobian(rvec);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const Vec3 m = world[i].vec();
      const Vec3 xc = rot * m + p.tail<3>();
      if (xc.z() <= 1e-9) return std::numeric_limits<double>::infinity();
      const double inv_z = 1.0 / xc.z();
      const double xhat = xc.x() * inv_z, yhat = xc.y() * inv_z;
      const Eigen::Vector2d res(k.fx * xhat + k.cx - undist[i].x,
                                k.fy * yhat + k.cy - undist[i].y);
      total += res.squaredNorm();

      Eigen::Matrix<double, 2, 3> pin;
      pin << k.fx * inv_z, 0.0, -k.fx * xhat * inv_z, 0.0, k.fy * inv_z, -k.fy * yhat * inv_z;
      Eigen::Matrix<double, 2, 6> jac;
      jac.block<2, 3>(0, 0) = pin * (-rot * skew(m) * jr);
      jac.block<2, 3>(0, 3) = pin;
      hess += jac.transpose() * jac;
      grad += jac.transpose() * res;
    }
    return total;
  };

  Eigen::VectorXd x(6);
  x.head<3>() = init.rvec;
  x.tail<3>() = init.tvec;
  lm_minimize(x, build, cost_fn);

  ViewPose pose;
  pose.rvec = x.head<3>();
  pose.tvec = x.tail<3>();
  return pose;
}

namespace detail {

/// Joint pose refinement state: parameters are the non-reference relative
/// poses plus per-frame pattern poses (expressed in the reference view);
/// intrinsics and distortion stay fixed, residuals live in undistorted
/// pixel coordinates.
struct JointPoseProblem {
  const ViewGrid* grid = nullptr;
  std::vector<WorldPoint> world;
  // undistorted corner observations indexed [frame][view][corner]
  std::vector<std::vector<std::vector<PixelPoint>>> obs;
  std::vector<IntrinsicMatrix> intrinsics;

  int views() const { return grid->size(); }
  int frames() const { return static_cast<int>(obs.size()); }
  int param_count() const { return 6 * (views() - 1) + 6 * frames(); }

  // Non-reference views keep their natural order; the reference is skipped.
  int view_block(int view) const {
    const int ref = grid->reference_index();
    if (view == ref) return -1;
    const int shifted = view < ref ? view : view - 1;
    return 6 * shifted;
  }
  int frame_block(int frame) const { return 6 * (views() - 1) + 6 * frame; }

  double eval(const Eigen::VectorXd& x, Eigen::MatrixXd* hess, Eigen::VectorXd* grad) const {
    const int n_views = views();
    const int ref = grid->reference_index();
    double total = 0.0;
    if (hess) {
      hess->setZero(param_count(), param_count());
      grad->setZero(param_count());
    }

    std::vector<Mat3> view_rot(n_views), view_jr(n_views);
    std::vector<Vec3> view_t(n_views);
    for (int i = 0; i < n_views; ++i) {
      if (i == ref) {
        view_rot[i] = Mat3::Identity();
        view_jr[i] = Mat3::Identity();
        view_t[i] = Vec3::Zero();
      } else {
        const Vec3 rv = x.segment<3>(view_block(i));
        view_rot[i] = rodrigues_to_matrix(rv);
        view_jr[i] = so3_right_jacobian(rv);
        view_t[i] = x.segment<3>(view_block(i) + 3);
      }
    }

    for (int f = 0; f < frames(); ++f) {
      const Vec3 rv_pat = x.segment<3>(frame_block(f));
      const Vec3 t_pat = x.segment<3>(frame_block(f) + 3);
      const Mat3 rot_pat = rodrigues_to_matrix(rv_pat);
      const Mat3 jr_pat = so3_right_jacobian(rv_pat);

      for (int i = 0; i < n_views; ++i) {
        const IntrinsicMatrix& k = intrinsics[i];
        for (size_t c = 0; c < world.size(); ++c) {
          const Vec3 m = world[c].vec();
          const Vec3 x_ref = rot_pat * m + t_pat;
          const Vec3 xc = view_rot[i] * x_ref + view_t[i];
          if (xc.z() <= 1e-9) return std::numeric_limits<double>::infinity();
          const double inv_z = 1.0 / xc.z();
          const double xhat = xc.x() * inv_z, yhat = xc.y() * inv_z;
          const Eigen::Vector2d res(k.fx * xhat + k.cx - obs[f][i][c].x,
                                    k.fy * yhat + k.cy - obs[f][i][c].y);
          total += res.squaredNorm();
          if (!hess) continue;

          Eigen::Matrix<double, 2, 3> pin;
          pin << k.fx * inv_z, 0.0, -k.fx * xhat * inv_z, 0.0, k.fy * inv_z,
              -k.fy * yhat * inv_z;

          const Eigen::Matrix<double, 2, 3> d_tpat = pin * view_rot[i];
          const Eigen::Matrix<double, 2, 3> d_rpat = d_tpat * (-rot_pat * skew(m) * jr_pat);

          const int fb = frame_block(f);
          const int vb = view_block(i);

          if (vb >= 0) {
            Eigen::Matrix<double, 2, 12> jac;
            jac.block<2, 3>(0, 0) = pin * (-view_rot[i] * skew(x_ref) * view_jr[i]);
            jac.block<2, 3>(0, 3) = pin;
            jac.block<2, 3>(0, 6) = d_rpat;
            jac.block<2, 3>(0, 9) = d_tpat;
            std::array<int, 12> cols;
            for (int a = 0; a < 6; ++a) cols[a] = vb + a;
            for (int a = 0; a < 6; ++a) cols[6 + a] = fb + a;
            for (int a = 0; a < 12; ++a) {
              (*grad)(cols[a]) += jac.col(a).dot(res);
              for (int b = a; b < 12; ++b) {
                const double val = jac.col(a).dot(jac.col(b));
                (*hess)(cols[a], cols[b]) += val;
                if (a != b) (*hess)(cols[b], cols[a]) += val;
              }
            }
          } else {
            Eigen::Matrix<double, 2, 6> jac;
            jac.block<2, 3>(0, 0) = d_rpat;
            jac.block<2, 3>(0, 3) = d_tpat;
            for (int a = 0; a < 6; ++a) {
              (*grad)(fb + a) += jac.col(a).dot(res);
              for (int b = a; b < 6; ++b) {
                const double val = jac.col(a).dot(jac.col(b));
                (*hess)(fb + a, fb + b) += val;
                if (a != b) (*hess)(fb + b, fb + a) += val;
              }
            }
          }
        }
      }
    }
    return total;
  }
};

}  // namespace detail

/// Full light-field pattern calibration. Per-view intrinsics come from
/// calibrate_view; per-frame poses from solve_pnp; each view's pose relative
/// to the reference is composed per frame, averaged over frames (rotation in
/// Rodrigues space, translation arithmetically), then refined jointly with
/// the pattern poses while intrinsics stay fixed. The reference view's pose
/// is exactly zero by construction. Throws FrameMismatch when a frame is
/// missing any view.
inline LightFieldCalibration calibrate_lightfield(
    const std::vector<PatternObservation>& observations, const CheckerboardSpec& spec,
    const ViewGrid& grid, int width, int height) {
  spec.validate();
  grid.validate();
  const int n_views = grid.size();
  const int ref = grid.reference_index();

  // Group observations; every (frame, view) cell must be present.
  int max_frame = -1;
  for (const auto& obs : observations) max_frame = std::max(max_frame, obs.frame_index);
  const int n_frames = max_frame + 1;
  if (n_frames < 3) fail("InsufficientFrames", "light-field calibration needs at least 3 frames");

  std::vector<std::vector<const PatternObservation*>> cells(
      n_frames, std::vector<const PatternObservation*>(n_views, nullptr));
  for (const auto& obs : observations) {
    if (obs.view_index < 0 || obs.view_index >= n_views)
      fail("FrameMismatch", "observation names a view outside the grid");
    if (obs.frame_index < 0) fail("FrameMismatch", "negative frame index");
    cells[obs.frame_index][obs.view_index] = &obs;
  }
  for (int f = 0; f < n_frames; ++f)
    for (int i = 0; i < n_views; ++i)
      if (!cells[f][i])
        fail("FrameMismatch", "frame " + std::to_string(f) + " is missing view " +
                                  std::to_string(i));

  // Per-view intrinsic calibration; views are independent.
  std::vector<ViewCalibration> per_view(n_views);
  std::vector<std::exception_ptr> errors(n_views);
  parallel_for(n_views, [&](int i) {
    try {
      std::vector<PatternObservation> view_obs;
      view_obs.reserve(n_frames);
      for (int f = 0; f < n_frames; ++f) view_obs.push_back(*cells[f][i]);
      per_view[i] = calibrate_view(view_obs, spec, width, height);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  });
  for (int i = 0; i < n_views; ++i)
    if (errors[i]) std::rethrow_exception(errors[i]);

  // Per-frame PnP and relative-pose averaging.
  const std::vector<WorldPoint> world = pattern_world_points(spec);
  std::vector<std::vector<ViewPose>> pnp(n_frames, std::vector<ViewPose>(n_views));
  for (int f = 0; f < n_frames; ++f)
    for (int i = 0; i < n_views; ++i)
      pnp[f][i] = solve_pnp(world, cells[f][i]->corners, per_view[i].k, per_view[i].d);

  std::vector<ViewPose> rel(n_views);
  for (int i = 0; i < n_views; ++i) {
    if (i == ref) continue;
    Vec3 rvec_sum = Vec3::Zero();
    Vec3 t_sum = Vec3::Zero();
    for (int f = 0; f < n_frames; ++f) {
      const Mat3 r_i = rodrigues_to_matrix(pnp[f][i].rvec);
      const Mat3 r_ref = rodrigues_to_matrix(pnp[f][ref].rvec);
      const Mat3 r_rel = r_i * r_ref.transpose();
      rvec_sum += matrix_to_rodrigues(r_rel);
      t_sum += pnp[f][i].tvec - r_rel * pnp[f][ref].tvec;
    }
    rel[i].rvec = rvec_sum / n_frames;
    rel[i].tvec = t_sum / n_frames;
  }

  // Joint refinement of relative poses and pattern poses.
  detail::JointPoseProblem problem;
  problem.grid = &grid;
  problem.world = world;
  problem.obs.resize(n_frames);
  problem.intrinsics.resize(n_views);
  for (int i = 0; i < n_views; ++i) problem.intrinsics[i] = per_view[i].k;
  for (int f = 0; f < n_frames; ++f) {
    problem.obs[f].resize(n_views);
    for (int i = 0; i < n_views; ++i) {
      problem.obs[f][i].reserve(world.size());
      for (const auto& corner : cells[f][i]->corners)
        problem.obs[f][i].push_back(remove_distortion(per_view[i].d, corner));
    }
  }

  Eigen::VectorXd x(problem.param_count());
  for (int i = 0; i < n_views; ++i) {
    const int vb = problem.view_block(i);
    if (vb < 0) continue;
    x.segment<3>(vb) = rel[i].rvec;
    x.segment<3>(vb + 3) = rel[i].tvec;
  }
  for (int f = 0; f < n_frames; ++f) {
    x.segment<3>(problem.frame_block(f)) = pnp[f][ref].rvec;
    x.segment<3>(problem.frame_block(f) + 3) = pnp[f][ref].tvec;
  }

  const LmSummary summary = lm_minimize(
      x,
      [&](const Eigen::VectorXd& p, Eigen::MatrixXd& h, Eigen::VectorXd& g) {
        return problem.eval(p, &h, &g);
      },
      [&](const Eigen::VectorXd& p) { return problem.eval(p, nullptr, nullptr); });
  if (!std::isfinite(summary.final_cost))
    fail("NoConvergence", "joint pose refinement did not reach a finite cost");

  LightFieldCalibration result;
  result.grid = grid;
  result.per_view = per_view;
  result.poses_rel_reference.resize(n_views);
  for (int i = 0; i < n_views; ++i) {
    const int vb = problem.view_block(i);
    if (vb < 0) {
      result.poses_rel_reference[i] = ViewPose{};  // reference: exactly zero
    } else {
      result.poses_rel_reference[i].rvec = x.segment<3>(vb);
      result.poses_rel_reference[i].tvec = x.segment<3>(vb + 3);
    }
  }
  const int total = n_frames * n_views * static_cast<int>(world.size());
  result.rms_pnp = std::sqrt(summary.final_cost / total);
  return result;
}

}  // namespace lfcal
