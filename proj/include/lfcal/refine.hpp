#pragma once

#include "lfcal/calibrate.hpp"
#include "lfcal/distortion.hpp"
#include "lfcal/rotation.hpp"
#include "lfcal/tracks.hpp"
#include "lfcal/types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace lfcal {

/// Knobs for the refinement pipeline. The defaults match the pipeline's
/// intended operating point: sub-pixel deduplication, a 2 px epipolar band,
/// and a 0.5 px stopping RMS.
struct RefineConfig {
  double dedup_threshold = std::sqrt(2.0);
  double epipolar_threshold = 2.0;  // Sampson distance, pixels
  int max_frames = 10;
  double rms_threshold = 0.5;  // stop refining once rms_after drops below
  std::uint64_t seed = 0;
  std::array<int, 3> stage_iterations{100, 100, 100};
  // Tether on the camera parameters toward each solver run's entry state.
  // It pins the gauge families a translational grid cannot observe and is
  // orders of magnitude below every data-determined curvature; it never
  // counts toward reported RMS values.
  double anchor_weight = 1e-5;
  // Staged is the supported mode: points first, then points + intrinsics,
  // then everything but the reference pose. The joint single-pass mode is
  // kept for comparison experiments; it may fail to recover.
  bool staged = true;
};

/// Output of bundle adjustment (and of the surrounding refine() loop).
/// stage_rms holds the reprojection RMS after each of the three stages;
/// an unstaged run reports its single final RMS in all three slots.
struct RefinementResult {
  LightFieldCalibration calibration;
  std::vector<WorldPoint> points;  // refined track positions, input order
  double rms_before = 0.0;         // pixels
  double rms_after = 0.0;          // pixels
  std::array<double, 3> stage_rms{0.0, 0.0, 0.0};
  FilterReport report;  // cumulative counts when produced by refine()
  int frames_used = 0;
};

namespace detail {

/// Bundle adjustment over a light-field rig: per-view pinhole intrinsics
/// (fx, fy, cx, cy), per-view poses relative to the pinned reference view,
/// and one 3D point per track. Skew and the radial distortion (coefficients
/// and center) stay at their calibrated values; observations are compared
/// in distorted pixel space. The reduced camera system is solved through
/// the Schur complement over the 3x3 point blocks.
struct BundleProblem {
  const LightFieldCalibration* calib = nullptr;
  const std::vector<Track>* tracks = nullptr;
  int n_views = 0;
  int ref = 0;

  bool fit_intrinsics = false;
  bool fit_poses = false;

  // Gauge anchor: a near-translational rig leaves whole camera-parameter
  // families unobservable (a common focal scale against rescaled baselines,
  // principal points against grid position), and without a tether the solver
  // wanders along them while the reprojection error sits at its floor. Each
  // run adds anchor_weight * |theta - theta_entry|^2 over the active camera
  // parameters; observable directions have curvatures many orders larger,
  // so only the flat family is pinned. Zero disables the anchor.
  double anchor_weight = 0.0;

  // Camera parameter layout: [fx fy cx cy] per view, then [rvec tvec] per
  // non-reference view. Points live in their own 3x3 blocks.
  int cam_dim() const {
    int dim = 0;
    if (fit_intrinsics) dim += 4 * n_views;
    if (fit_poses) dim += 6 * (n_views - 1);
    return dim;
  }
  int intrinsic_base(int view) const { return 4 * view; }
  int pose_base(int view) const {
    const int shifted = view < ref ? view : view - 1;
    return (fit_intrinsics ? 4 * n_views : 0) + 6 * shifted;
  }

  struct Derivatives {
    Eigen::MatrixXd u;   // cam x cam
    Eigen::VectorXd gc;  // cam
    std::vector<Eigen::Matrix3d> v;
    std::vector<Eigen::Vector3d> gp;
    std::vector<Eigen::MatrixXd> w;  // cam x 3 per point

    void reset(int cam, int points) {
      u.setZero(cam, cam);
      gc.setZero(cam);
      v.assign(points, Eigen::Matrix3d::Zero());
      gp.assign(points, Eigen::Vector3d::Zero());
      w.assign(points, Eigen::MatrixXd::Zero(cam, 3));
    }
  };

  /// Total squared reprojection error at the given state; infinity when a
  /// point reaches a camera's plane. Fills normal-equation blocks when
  /// derivs is non-null.
  double evaluate(const Eigen::VectorXd& intr, const Eigen::VectorXd& poses,
                  const Eigen::VectorXd& pts, Derivatives* derivs) const {
    const int cam = cam_dim();
    const int n_tracks = static_cast<int>(tracks->size());
    if (derivs) derivs->reset(cam, n_tracks);

    std::vector<Mat3> rot(n_views);
    std::vector<Vec3> rv(n_views), tv(n_views);
    std::vector<Mat3> jr(n_views);
    for (int i = 0; i < n_views; ++i) {
      if (fit_poses && i != ref) {
        const int pb_state = 6 * (i < ref ? i : i - 1);
        rv[i] = poses.segment<3>(pb_state);
        tv[i] = poses.segment<3>(pb_state + 3);
      } else {
        rv[i] = calib->poses_rel_reference[i].rvec;
        tv[i] = calib->poses_rel_reference[i].tvec;
      }
      rot[i] = rodrigues_to_matrix(rv[i]);
      if (derivs && fit_poses && i != ref) jr[i] = so3_right_jacobian(rv[i]);
    }

    double total = 0.0;
    for (int t = 0; t < n_tracks; ++t) {
      const Vec3 x = pts.segment<3>(3 * t);
      for (int i = 0; i < n_views; ++i) {
        const double fx = intr(4 * i), fy = intr(4 * i + 1);
        const double cx = intr(4 * i + 2), cy = intr(4 * i + 3);
        const double sk = calib->per_view[i].k.skew;  // pinned
        const RadialDistortion& d = calib->per_view[i].d;

        const Vec3 xc = rot[i] * x + tv[i];
        if (xc.z() <= 1e-9) return std::numeric_limits<double>::infinity();
        const double inv_z = 1.0 / xc.z();
        const double xhat = xc.x() * inv_z;
        const double yhat = xc.y() * inv_z;
        const double u = fx * xhat + sk * yhat + cx;
        const double v = fy * yhat + cy;
        // The distortion center is part of the frozen distortion model, so
        // it does not follow cx, cy here.
        const double du = u - d.center_x, dv = v - d.center_y;
        const double rho2 = du * du + dv * dv;
        const double g = 1.0 + rho2 * (d.k1 + rho2 * d.k2);

        const PixelPoint& obs = (*tracks)[t].obs[i];
        const Eigen::Vector2d res(d.center_x + du * g - obs.x, d.center_y + dv * g - obs.y);
        total += res.squaredNorm();
        if (!derivs) continue;

        const double gh = d.k1 + 2.0 * d.k2 * rho2;
        const Eigen::Matrix2d dist_jac = distortion_jacobian(du, dv, g, gh);
        Eigen::Matrix<double, 2, 3> pin;  // d(u,v)/dXc
        pin << fx * inv_z, sk * inv_z, -(fx * xhat + sk * yhat) * inv_z, 0.0, fy * inv_z,
            -fy * yhat * inv_z;
        const Eigen::Matrix<double, 2, 3> outer = dist_jac * pin;
        const Eigen::Matrix<double, 2, 3> jp = outer * rot[i];

        derivs->v[t].noalias() += jp.transpose() * jp;
        derivs->gp[t].noalias() += jp.transpose() * res;

        Eigen::Matrix<double, 2, 4> ji;
        Eigen::Matrix<double, 2, 6> jq;
        if (fit_intrinsics) {
          ji.col(0) = dist_jac.col(0) * xhat;
          ji.col(1) = dist_jac.col(1) * yhat;
          ji.col(2) = dist_jac.col(0);
          ji.col(3) = dist_jac.col(1);
          const int ib = intrinsic_base(i);
          derivs->u.block<4, 4>(ib, ib).noalias() += ji.transpose() * ji;
          derivs->gc.segment<4>(ib).noalias() += ji.transpose() * res;
          derivs->w[t].block<4, 3>(ib, 0).noalias() += ji.transpose() * jp;
        }
        if (fit_poses && i != ref) {
          jq.block<2, 3>(0, 0) = outer * (-rot[i] * skew(x) * jr[i]);
          jq.block<2, 3>(0, 3) = outer;
          const int pb = pose_base(i);
          derivs->u.block<6, 6>(pb, pb).noalias() += jq.transpose() * jq;
          derivs->gc.segment<6>(pb).noalias() += jq.transpose() * res;
          derivs->w[t].block<6, 3>(pb, 0).noalias() += jq.transpose() * jp;
          if (fit_intrinsics) {
            const int ib = intrinsic_base(i);
            const Eigen::Matrix<double, 4, 6> cross = ji.transpose() * jq;
            derivs->u.block<4, 6>(ib, pb) += cross;
            derivs->u.block<6, 4>(pb, ib) += cross.transpose();
          }
        }
      }
    }
    return total;
  }

  /// One Levenberg-Marquardt run over the active blocks, mirroring the
  /// dense solver's schedule: multiplicative damping (unit floor on zero
  /// diagonals), lambda x10 on reject / /10 on accept with a 1e-12 floor,
  /// stop on small gradient, tiny cost, relative improvement below 1e-12,
  /// or a step rejected at maximum damping.
  double run(Eigen::VectorXd& intr, Eigen::VectorXd& poses, Eigen::VectorXd& pts,
             int max_iterations) const {
    const int cam = cam_dim();
    const int n_tracks = static_cast<int>(tracks->size());

    const Eigen::VectorXd anchor_intr = intr;
    const Eigen::VectorXd anchor_poses = poses;
    const auto prior_cost = [&](const Eigen::VectorXd& ci, const Eigen::VectorXd& cp) {
      if (anchor_weight <= 0.0 || cam == 0) return 0.0;
      double p = 0.0;
      if (fit_intrinsics) p += (ci - anchor_intr).squaredNorm();
      if (fit_poses) p += (cp - anchor_poses).squaredNorm();
      return anchor_weight * p;
    };
    const auto apply_prior = [&](Derivatives& der, const Eigen::VectorXd& ci,
                                 const Eigen::VectorXd& cp) {
      if (anchor_weight <= 0.0 || cam == 0) return;
      if (fit_intrinsics) {
        der.u.diagonal().head(4 * n_views).array() += anchor_weight;
        der.gc.head(4 * n_views) += anchor_weight * (ci - anchor_intr);
      }
      if (fit_poses) {
        der.u.diagonal().tail(6 * (n_views - 1)).array() += anchor_weight;
        der.gc.tail(6 * (n_views - 1)) += anchor_weight * (cp - anchor_poses);
      }
    };

    Derivatives d;
    double current = evaluate(intr, poses, pts, &d);
    if (!std::isfinite(current))
      fail("NoConvergence", "bundle adjustment started from an invalid geometry");
    current += prior_cost(intr, poses);
    apply_prior(d, intr, poses);

    double lambda = 1e-3;
    for (int iter = 0; iter < max_iterations; ++iter) {
      double grad_inf = cam > 0 ? d.gc.lpNorm<Eigen::Infinity>() : 0.0;
      for (const auto& gp : d.gp) grad_inf = std::max(grad_inf, gp.lpNorm<Eigen::Infinity>());
      if (grad_inf < 1e-12 || current < 1e-25) break;

      bool accepted = false;
      bool converged = false;
      while (lambda <= 1e14) {
        // Damped point-block inverses; the camera system is reduced through
        // S = U - sum_k W_k M_k W_k^T before the dense solve.
        std::vector<Eigen::Matrix3d> m(n_tracks);
        bool blocks_ok = true;
        for (int t = 0; t < n_tracks && blocks_ok; ++t) {
          Eigen::Matrix3d damped = d.v[t];
          for (int a = 0; a < 3; ++a) {
            const double diag = damped(a, a);
            damped(a, a) = diag + lambda * (diag > 0.0 ? diag : 1.0);
          }
          m[t] = damped.inverse();
          blocks_ok = m[t].allFinite();
        }
        if (!blocks_ok) {
          lambda *= 10.0;
          continue;
        }

        Eigen::VectorXd delta_c;
        if (cam > 0) {
          Eigen::MatrixXd s = d.u;
          for (int a = 0; a < cam; ++a) {
            const double diag = s(a, a);
            s(a, a) = diag + lambda * (diag > 0.0 ? diag : 1.0);
          }
          Eigen::VectorXd rhs = -d.gc;
          for (int t = 0; t < n_tracks; ++t) {
            s.noalias() -= d.w[t] * (m[t] * d.w[t].transpose());
            rhs.noalias() += d.w[t] * (m[t] * d.gp[t]);
          }
          delta_c = s.ldlt().solve(rhs);
          if (!delta_c.allFinite()) {
            lambda *= 10.0;
            continue;
          }
        }

        Eigen::VectorXd cand_pts = pts;
        for (int t = 0; t < n_tracks; ++t) {
          Eigen::Vector3d back = -d.gp[t];
          if (cam > 0) back.noalias() -= d.w[t].transpose() * delta_c;
          cand_pts.segment<3>(3 * t) += m[t] * back;
        }
        Eigen::VectorXd cand_intr = intr;
        Eigen::VectorXd cand_poses = poses;
        if (fit_intrinsics) cand_intr += delta_c.head(4 * n_views);
        if (fit_poses)
          cand_poses += delta_c.tail(6 * (n_views - 1));

        const double cost =
            evaluate(cand_intr, cand_poses, cand_pts, nullptr) + prior_cost(cand_intr, cand_poses);
        if (std::isfinite(cost) && cost < current) {
          const double improvement = (current - cost) / current;
          intr = cand_intr;
          poses = cand_poses;
          pts = cand_pts;
          current = cost;
          lambda = std::max(lambda / 10.0, 1e-12);
          accepted = true;
          if (improvement < 1e-12) converged = true;
          break;
        }
        lambda *= 10.0;
      }
      if (!accepted || converged) break;
      evaluate(intr, poses, pts, &d);
      apply_prior(d, intr, poses);
    }
    // The anchor steers the solve but never counts toward the reported
    // reprojection error. Accepted steps only ever lower the combined cost
    // from a zero-anchor start, so the pure residual still never degrades.
    return evaluate(intr, poses, pts, nullptr);
  }
};

}  // namespace detail

/// Refines a calibration against fully chained tracks: (1) point positions
/// alone, (2) points with per-view pinhole intrinsics, (3) points,
/// intrinsics, and every non-reference pose. Distortion, skew, and the
/// reference pose are pinned, so the reference view's pose comes back
/// bit-identical. Stage RMS values never increase across stages. Requires
/// at least 15 triangulated tracks (InsufficientTracks); throws
/// NoConvergence when the optimization cannot reach a finite cost and
/// GaugeDrift if the reference pose were ever to move.
inline RefinementResult bundle_adjust(const std::vector<Track>& tracks,
                                      const LightFieldCalibration& initial,
                                      const RefineConfig& config = {}) {
  initial.grid.validate();
  const int n_views = initial.grid.size();
  if (static_cast<int>(initial.per_view.size()) != n_views ||
      static_cast<int>(initial.poses_rel_reference.size()) != n_views)
    fail("SizeMismatch", "calibration must carry one intrinsics and pose block per view");
  if (tracks.size() < 15)
    fail("InsufficientTracks", "bundle adjustment needs at least 15 tracks, got " +
                                   std::to_string(tracks.size()));
  for (const auto& t : tracks) {
    if (static_cast<int>(t.obs.size()) != n_views || !t.complete())
      fail("SizeMismatch", "every track must observe every view");
    if (!t.has_x) fail("SizeMismatch", "tracks must arrive triangulated");
  }

  if (config.anchor_weight < 0.0)
    fail("InvalidThreshold", "anchor weight must be non-negative");

  detail::BundleProblem problem;
  problem.calib = &initial;
  problem.tracks = &tracks;
  problem.n_views = n_views;
  problem.ref = initial.grid.reference_index();
  problem.anchor_weight = config.anchor_weight;

  const int n_tracks = static_cast<int>(tracks.size());
  Eigen::VectorXd intr(4 * n_views);
  for (int i = 0; i < n_views; ++i) {
    const IntrinsicMatrix& k = initial.per_view[i].k;
    intr.segment<4>(4 * i) << k.fx, k.fy, k.cx, k.cy;
  }
  Eigen::VectorXd poses(6 * (n_views - 1));
  for (int i = 0; i < n_views; ++i) {
    if (i == problem.ref) continue;
    const int shifted = i < problem.ref ? i : i - 1;
    poses.segment<3>(6 * shifted) = initial.poses_rel_reference[i].rvec;
    poses.segment<3>(6 * shifted + 3) = initial.poses_rel_reference[i].tvec;
  }
  Eigen::VectorXd pts(3 * n_tracks);
  for (int t = 0; t < n_tracks; ++t) pts.segment<3>(3 * t) = tracks[t].x.vec();

  const double n_obs = static_cast<double>(n_tracks) * n_views;
  const auto rms = [n_obs](double cost) { return std::sqrt(cost / n_obs); };

  RefinementResult result;
  {
    const double initial_cost = problem.evaluate(intr, poses, pts, nullptr);
    if (!std::isfinite(initial_cost))
      fail("NoConvergence", "initial geometry projects a track behind a camera");
    result.rms_before = rms(initial_cost);
  }

  double final_cost = 0.0;
  if (config.staged) {
    problem.fit_intrinsics = false;
    problem.fit_poses = false;
    result.stage_rms[0] = rms(problem.run(intr, poses, pts, config.stage_iterations[0]));
    problem.fit_intrinsics = true;
    result.stage_rms[1] = rms(problem.run(intr, poses, pts, config.stage_iterations[1]));
    problem.fit_poses = true;
    final_cost = problem.run(intr, poses, pts, config.stage_iterations[2]);
    result.stage_rms[2] = rms(final_cost);
  } else {
    problem.fit_intrinsics = true;
    problem.fit_poses = true;
    const int budget =
        config.stage_iterations[0] + config.stage_iterations[1] + config.stage_iterations[2];
    final_cost = problem.run(intr, poses, pts, budget);
    result.stage_rms = {rms(final_cost), rms(final_cost), rms(final_cost)};
  }
  if (!std::isfinite(final_cost))
    fail("NoConvergence", "bundle adjustment did not reach a finite cost");
  result.rms_after = result.stage_rms[2];

  result.calibration = initial;
  for (int i = 0; i < n_views; ++i) {
    IntrinsicMatrix& k = result.calibration.per_view[i].k;
    k.fx = intr(4 * i);
    k.fy = intr(4 * i + 1);
    k.cx = intr(4 * i + 2);
    k.cy = intr(4 * i + 3);
    k.validate();
    if (i == problem.ref) continue;
    const int shifted = i < problem.ref ? i : i - 1;
    result.calibration.poses_rel_reference[i].rvec = poses.segment<3>(6 * shifted);
    result.calibration.poses_rel_reference[i].tvec = poses.segment<3>(6 * shifted + 3);
  }

  // Image correspondences cannot observe the global scale of points and
  // translations; scaling both together is residual-neutral. Re-anchor the
  // solution to the initial calibration's translation field so the output
  // keeps its metric datum instead of wherever the optimizer drifted.
  {
    double num = 0.0, den = 0.0;
    for (int i = 0; i < n_views; ++i) {
      num += result.calibration.poses_rel_reference[i].tvec.dot(
          initial.poses_rel_reference[i].tvec);
      den += result.calibration.poses_rel_reference[i].tvec.squaredNorm();
    }
    if (den > 0.0 && num > 0.0) {
      const double scale = num / den;
      for (int i = 0; i < n_views; ++i) {
        if (i == problem.ref) continue;
        result.calibration.poses_rel_reference[i].tvec *= scale;
      }
      pts *= scale;
    }
  }
  const ViewPose& ref_in = initial.poses_rel_reference[problem.ref];
  const ViewPose& ref_out = result.calibration.poses_rel_reference[problem.ref];
  if (!(ref_out.rvec.array() == ref_in.rvec.array()).all() ||
      !(ref_out.tvec.array() == ref_in.tvec.array()).all())
    fail("GaugeDrift", "reference pose moved during bundle adjustment");

  result.points.resize(n_tracks);
  for (int t = 0; t < n_tracks; ++t)
    result.points[t] = {pts(3 * t), pts(3 * t + 1), pts(3 * t + 2)};
  return result;
}

/// Pairwise matches of one captured frame, one list per adjacent view pair
/// along the chain order.
using MatchChain = std::vector<std::vector<PairMatch>>;

/// Full auto-refinement loop. Each frame's matches pass through
/// deduplication (on the chain's starting view), chain composition,
/// epipolar filtering, and the median triangulation filter before staged
/// bundle adjustment updates the calibration; later frames are filtered
/// with the already-refined model. Stops after max_frames, when the frames
/// run out, or once rms_after falls under rms_threshold. The report
/// accumulates counts over the frames actually used; median_reproj is the
/// last frame's median. Throws AllTracksFiltered when a frame's tracks all
/// die, and propagates the stage errors (InsufficientMatches,
/// InsufficientTracks, NoConvergence).
inline RefinementResult refine(const std::vector<MatchChain>& frames,
                               const LightFieldCalibration& initial,
                               const RefineConfig& config = {}) {
  if (frames.empty()) fail("EmptyInput", "refinement needs at least one frame of matches");
  initial.grid.validate();

  LightFieldCalibration current = initial;
  RefinementResult result;
  result.calibration = initial;
  FilterReport report;
  bool first_frame = true;

  const int frame_limit = std::min<int>(config.max_frames, static_cast<int>(frames.size()));
  for (int f = 0; f < frame_limit; ++f) {
    MatchChain chain = frames[f];
    if (chain.empty()) fail("EmptyChain", "frame " + std::to_string(f) + " carries no matches");
    report.input_count += static_cast<int>(chain[0].size());

    // Deduplicate the chain's starting features; hops from removed
    // duplicates are dropped with them.
    std::vector<PixelPoint> starts;
    starts.reserve(chain[0].size());
    for (const auto& m : chain[0]) starts.push_back(m.a);
    const std::vector<bool> keep = deduplication_mask(starts, config.dedup_threshold);
    std::vector<PairMatch> deduped;
    deduped.reserve(chain[0].size());
    for (size_t i = 0; i < chain[0].size(); ++i)
      if (keep[i]) deduped.push_back(chain[0][i]);
    report.after_dedup += static_cast<int>(deduped.size());
    chain[0] = std::move(deduped);

    std::vector<Track> tracks = chain_match(chain, current.grid);
    report.after_chain += static_cast<int>(tracks.size());
    if (tracks.empty())
      fail("AllTracksFiltered", "chain matching removed every track of frame " +
                                    std::to_string(f));

    tracks = epipolar_filter(tracks, current.grid, config.epipolar_threshold,
                             config.seed + 1000003ull * static_cast<std::uint64_t>(f));
    report.after_epipolar += static_cast<int>(tracks.size());
    if (tracks.empty())
      fail("AllTracksFiltered", "the epipolar filter removed every track of frame " +
                                    std::to_string(f));

    const auto [kept, median] = triangulation_filter(tracks, current);
    report.after_triangulation += static_cast<int>(kept.size());
    report.median_reproj = median;
    if (kept.empty())
      fail("AllTracksFiltered", "the triangulation filter removed every track of frame " +
                                    std::to_string(f));

    const RefinementResult ba = bundle_adjust(kept, current, config);
    current = ba.calibration;
    if (first_frame) {
      result.rms_before = ba.rms_before;
      first_frame = false;
    }
    result.rms_after = ba.rms_after;
    result.stage_rms = ba.stage_rms;
    result.points = ba.points;
    result.frames_used = f + 1;
    if (ba.rms_after < config.rms_threshold) break;
  }

  result.calibration = current;
  result.report = report;
  return result;
}

}  // namespace lfcal
