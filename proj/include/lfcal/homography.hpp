#pragma once

#include "lfcal/levenberg_marquardt.hpp"
#include "lfcal/types.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace lfcal {

namespace detail {

/// Hartley normalization: centroid to the origin, mean radius to sqrt(2).
inline Mat3 normalizing_transform(const std::vector<PixelPoint>& pts) {
  double mx = 0.0, my = 0.0;
  for (const auto& p : pts) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += std::hypot(p.x - mx, p.y - my);
  mean_dist /= static_cast<double>(pts.size());
  const double s = mean_dist > 1e-300 ? std::sqrt(2.0) / mean_dist : 1.0;
  Mat3 t;
  t << s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0;
  return t;
}

inline PixelPoint apply_homography(const Mat3& h, const PixelPoint& p) {
  const Vec3 q = h * Vec3(p.x, p.y, 1.0);
  if (std::abs(q.z()) <= 1e-14) fail("DegenerateConfiguration", "homography maps point to infinity");
  return {q.x() / q.z(), q.y() / q.z()};
}

/// Sum of squared symmetric transfer errors for H with h22 fixed to 1.
inline double symmetric_transfer_cost(const Eigen::VectorXd& params,
                                      const std::vector<PixelPoint>& src,
                                      const std::vector<PixelPoint>& dst) {
  Mat3 h;
  h << params(0), params(1), params(2), params(3), params(4), params(5), params(6), params(7), 1.0;
  const Eigen::FullPivLU<Mat3> lu(h);
  if (!lu.isInvertible()) return std::numeric_limits<double>::infinity();
  const Mat3 hinv = lu.inverse();
  double cost = 0.0;
  for (size_t i = 0; i < src.size(); ++i) {
    const Vec3 fwd = h * Vec3(src[i].x, src[i].y, 1.0);
    const Vec3 bwd = hinv * Vec3(dst[i].x, dst[i].y, 1.0);
    if (std::abs(fwd.z()) <= 1e-14 || std::abs(bwd.z()) <= 1e-14)
      return std::numeric_limits<double>::infinity();
    const double fx = fwd.x() / fwd.z() - dst[i].x;
    const double fy = fwd.y() / fwd.z() - dst[i].y;
    const double bx = bwd.x() / bwd.z() - src[i].x;
    const double by = bwd.y() / bwd.z() - src[i].y;
    cost += fx * fx + fy * fy + bx * bx + by * by;
  }
  return cost;
}

}  // namespace detail

/// Plane homography dst ~ H src via the normalized DLT (HZ alg. 4.2),
/// polished by Levenberg-Marquardt on the symmetric transfer error.
/// Scale is fixed by H(2,2) = 1. Throws DegenerateConfiguration when fewer
/// than 4 correspondences are given or the configuration (e.g. collinear
/// points) does not determine a unique homography.
inline Mat3 estimate_homography(const std::vector<PixelPoint>& src,
                                const std::vector<PixelPoint>& dst) {
  if (src.size() != dst.size()) fail("SizeMismatch", "correspondence lists differ in length");
  const size_t n = src.size();
  if (n < 4) fail("DegenerateConfiguration", "homography needs at least 4 correspondences");

  const Mat3 t_src = detail::normalizing_transform(src);
  const Mat3 t_dst = detail::normalizing_transform(dst);

  Eigen::MatrixXd a(2 * n, 9);
  for (size_t i = 0; i < n; ++i) {
    const Vec3 p = t_src * Vec3(src[i].x, src[i].y, 1.0);
    const Vec3 q = t_dst * Vec3(dst[i].x, dst[i].y, 1.0);
    a.row(2 * i) << -p.x(), -p.y(), -1.0, 0.0, 0.0, 0.0, q.x() * p.x(), q.x() * p.y(), q.x();
    a.row(2 * i + 1) << 0.0, 0.0, 0.0, -p.x(), -p.y(), -1.0, q.y() * p.x(), q.y() * p.y(), q.y();
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  if (sigma(7) < 1e-10 * std::max(sigma(0), 1e-300))
    fail("DegenerateConfiguration", "correspondences do not determine a unique homography");

  const Eigen::VectorXd h_vec = svd.matrixV().col(8);
  Mat3 h_norm;
  h_norm << h_vec(0), h_vec(1), h_vec(2), h_vec(3), h_vec(4), h_vec(5), h_vec(6), h_vec(7),
      h_vec(8);
  Mat3 h = t_dst.inverse() * h_norm * t_src;

  if (std::abs(h(2, 2)) <= 1e-12 * h.norm())
    fail("DegenerateConfiguration", "homography cannot be normalized to h22 = 1");
  h /= h(2, 2);

  // Gauss-Newton polish with a numeric Jacobian; 8 parameters, h22 pinned.
  Eigen::VectorXd params(8);
  params << h(0, 0), h(0, 1), h(0, 2), h(1, 0), h(1, 1), h(1, 2), h(2, 0), h(2, 1);

  const auto cost_fn = [&](const Eigen::VectorXd& x) {
    return detail::symmetric_transfer_cost(x, src, dst);
  };
  const auto build = [&](const Eigen::VectorXd& x, Eigen::MatrixXd& hess,
                         Eigen::VectorXd& grad) -> double {
    // Residual vector is implicit; assemble J^T J and J^T r by central
    // differences of the residuals, point by point.
    Mat3 hm;
    hm << x(0), x(1), x(2), x(3), x(4), x(5), x(6), x(7), 1.0;
    const size_t m = src.size();
    Eigen::MatrixXd jac(4 * m, 8);
    Eigen::VectorXd res(4 * m);
    const auto residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& out) -> bool {
      Mat3 hh;
      hh << p(0), p(1), p(2), p(3), p(4), p(5), p(6), p(7), 1.0;
      const Eigen::FullPivLU<Mat3> lu(hh);
      if (!lu.isInvertible()) return false;
      const Mat3 hinv = lu.inverse();
      for (size_t i = 0; i < m; ++i) {
        const Vec3 fwd = hh * Vec3(src[i].x, src[i].y, 1.0);
        const Vec3 bwd = hinv * Vec3(dst[i].x, dst[i].y, 1.0);
        if (std::abs(fwd.z()) <= 1e-14 || std::abs(bwd.z()) <= 1e-14) return false;
        out(4 * i + 0) = fwd.x() / fwd.z() - dst[i].x;
        out(4 * i + 1) = fwd.y() / fwd.z() - dst[i].y;
        out(4 * i + 2) = bwd.x() / bwd.z() - src[i].x;
        out(4 * i + 3) = bwd.y() / bwd.z() - src[i].y;
      }
      return true;
    };
    if (!residuals(x, res)) return std::numeric_limits<double>::infinity();
    Eigen::VectorXd plus(4 * m), minus(4 * m);
    for (int j = 0; j < 8; ++j) {
      const double delta = 1e-7 * std::max(std::abs(x(j)), 1.0);
      Eigen::VectorXd xp = x, xm = x;
      xp(j) += delta;
      xm(j) -= delta;
      if (!residuals(xp, plus) || !residuals(xm, minus))
        return std::numeric_limits<double>::infinity();
      jac.col(j) = (plus - minus) / (2.0 * delta);
    }
    hess = jac.transpose() * jac;
    grad = jac.transpose() * res;
    return res.squaredNorm();
  };

  LmOptions opt;
  opt.max_iterations = 30;
  lm_minimize(params, build, cost_fn, opt);

  Mat3 refined;
  refined << params(0), params(1), params(2), params(3), params(4), params(5), params(6),
      params(7), 1.0;
  return refined;
}

}  // namespace lfcal
