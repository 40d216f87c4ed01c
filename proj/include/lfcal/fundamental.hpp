#pragma once

#include "lfcal/homography.hpp"  // normalizing_transform
#include "lfcal/rng.hpp"
#include "lfcal/types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace lfcal {

struct FundamentalResult {
  Mat3 f = Mat3::Zero();
  std::vector<bool> inliers;
  int inlier_count = 0;
};

namespace detail {

/// Normalized 8-point estimate with the rank-2 constraint enforced by
/// zeroing the smallest singular value. Frobenius norm fixed to 1.
inline Mat3 eight_point(const std::vector<PixelPoint>& p1, const std::vector<PixelPoint>& p2,
                        const std::vector<int>& idx) {
  std::vector<PixelPoint> s1, s2;
  s1.reserve(idx.size());
  s2.reserve(idx.size());
  for (int i : idx) {
    s1.push_back(p1[i]);
    s2.push_back(p2[i]);
  }
  const Mat3 t1 = normalizing_transform(s1);
  const Mat3 t2 = normalizing_transform(s2);

  Eigen::MatrixXd a(idx.size(), 9);
  for (size_t k = 0; k < idx.size(); ++k) {
    const Vec3 x1 = t1 * Vec3(s1[k].x, s1[k].y, 1.0);
    const Vec3 x2 = t2 * Vec3(s2[k].x, s2[k].y, 1.0);
    a.row(k) << x2.x() * x1.x(), x2.x() * x1.y(), x2.x(), x2.y() * x1.x(), x2.y() * x1.y(),
        x2.y(), x1.x(), x1.y(), 1.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd fv = svd.matrixV().col(8);
  Mat3 fn;
  fn << fv(0), fv(1), fv(2), fv(3), fv(4), fv(5), fv(6), fv(7), fv(8);

  Eigen::JacobiSVD<Mat3> rank2(fn, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 sigma = rank2.singularValues();
  sigma(2) = 0.0;
  fn = rank2.matrixU() * sigma.asDiagonal() * rank2.matrixV().transpose();

  Mat3 f = t2.transpose() * fn * t1;
  const double norm = f.norm();
  if (norm > 0.0) f /= norm;
  return f;
}

/// First-order geometric (Sampson) distance in pixels.
inline double sampson_distance(const Mat3& f, const PixelPoint& p1, const PixelPoint& p2) {
  const Vec3 x1(p1.x, p1.y, 1.0);
  const Vec3 x2(p2.x, p2.y, 1.0);
  const Vec3 fx1 = f * x1;
  const Vec3 ftx2 = f.transpose() * x2;
  const double err = x2.dot(fx1);
  const double denom =
      fx1.x() * fx1.x() + fx1.y() * fx1.y() + ftx2.x() * ftx2.x() + ftx2.y() * ftx2.y();
  if (denom <= 0.0) return std::numeric_limits<double>::infinity();
  return std::abs(err) / std::sqrt(denom);
}

}  // namespace detail

/// Fundamental matrix by RANSAC over the normalized 8-point solver.
/// Inliers are matches with Sampson distance below `threshold` pixels.
/// Hypotheses are ranked by truncated quadratic loss sum(min(d^2, t^2))
/// rather than raw inlier count: with low-noise inliers a count tie lets a
/// bent model absorb near-threshold outliers, which the loss penalizes.
/// Iterates up to 2000 samples with an adaptive 99%-confidence early exit,
/// then re-estimates on the full consensus set. Deterministic under `seed`.
/// Throws InsufficientMatches (<8 pairs) and NoConsensus (best consensus
/// below 30% of the matches).
inline FundamentalResult estimate_fundamental_ransac(const std::vector<PixelPoint>& p1,
                                                     const std::vector<PixelPoint>& p2,
                                                     double threshold = 2.0, uint64_t seed = 0) {
  if (p1.size() != p2.size()) fail("SizeMismatch", "matched lists differ in length");
  const int n = static_cast<int>(p1.size());
  if (n < 8) fail("InsufficientMatches", "fundamental estimation needs at least 8 matches");

  Rng rng(seed);
  const int max_iterations = 2000;
  const double confidence = 0.99;

  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;

  const double squared_cap = threshold * threshold;
  const auto truncated_loss = [&](const Mat3& f, std::vector<bool>& mask, int& count) {
    double loss = 0.0;
    count = 0;
    for (int i = 0; i < n; ++i) {
      const double d = detail::sampson_distance(f, p1[i], p2[i]);
      const double d2 = d * d;
      if (d2 < squared_cap) {
        mask[i] = true;
        ++count;
        loss += d2;
      } else {
        mask[i] = false;
        loss += squared_cap;
      }
    }
    return loss;
  };

  Mat3 best_f = Mat3::Zero();
  int best_count = -1;
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<bool> best_mask(n, false);
  double required = max_iterations;

  for (int iter = 0; iter < max_iterations && iter < required; ++iter) {
    // Sample 8 distinct indices.
    std::vector<int> sample;
    sample.reserve(8);
    while (static_cast<int>(sample.size()) < 8) {
      const int cand = static_cast<int>(rng.index(static_cast<uint64_t>(n)));
      if (std::find(sample.begin(), sample.end(), cand) == sample.end()) sample.push_back(cand);
    }
    Mat3 f;
    try {
      f = detail::eight_point(p1, p2, sample);
    } catch (const Error&) {
      continue;  // degenerate sample
    }

    int count = 0;
    std::vector<bool> mask(n, false);
    const double loss = truncated_loss(f, mask, count);
    if (loss < best_loss) {
      best_loss = loss;
      best_count = count;
      best_f = f;
      best_mask = mask;
      const double w = static_cast<double>(count) / n;
      const double p_all = std::pow(w, 8);
      if (p_all >= 1.0 - 1e-12) {
        required = iter + 1.0;  // every sample is an inlier sample
      } else if (p_all > 0.0) {
        required = std::log(1.0 - confidence) / std::log(1.0 - p_all);
      }
    }
  }

  if (best_count < std::max(8, static_cast<int>(std::ceil(0.3 * n))))
    fail("NoConsensus", "best consensus set has fewer than 30% of the matches");

  // Final estimate on the consensus set, then the definitive inlier mask.
  std::vector<int> consensus;
  for (int i = 0; i < n; ++i)
    if (best_mask[i]) consensus.push_back(i);
  const Mat3 refit = detail::eight_point(p1, p2, consensus);

  FundamentalResult result;
  result.f = refit;
  result.inliers.assign(n, false);
  const double refit_loss = truncated_loss(refit, result.inliers, result.inlier_count);
  // The refit must not score worse than the winning sample; fall back if so.
  if (refit_loss > best_loss) {
    result.f = best_f;
    result.inliers = best_mask;
    result.inlier_count = best_count;
  }
  return result;
}

}  // namespace lfcal
