#pragma once

#include "lfcal/calibrate.hpp"
#include "lfcal/pattern.hpp"
#include "lfcal/projection.hpp"
#include "lfcal/rng.hpp"
#include "lfcal/tracks.hpp"
#include "lfcal/types.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace lfcal {

/// Ground-truth camera rig. Freshly made rigs are exactly rectified: equal
/// intrinsics, zero distortion, zero rotations, translations proportional
/// to grid offsets times the baseline.
struct SyntheticRig {
  ViewGrid grid;
  int width = 0;
  int height = 0;
  double baseline = 0.0;
  std::vector<IntrinsicMatrix> k_true;
  std::vector<RadialDistortion> d_true;
  std::vector<ViewPose> poses_true;  // relative to the reference view

  LightFieldCalibration as_calibration() const {
    LightFieldCalibration calib;
    calib.grid = grid;
    calib.per_view.resize(grid.size());
    for (int i = 0; i < grid.size(); ++i) {
      calib.per_view[i].k = k_true[i];
      calib.per_view[i].d = d_true[i];
      calib.per_view[i].rms_mono = 0.0;
    }
    calib.poses_rel_reference = poses_true;
    calib.rms_pnp = 0.0;
    return calib;
  }
};

struct NoiseSpec {
  double rot_z_sigma = 0.0;   // radians
  double trans_sigma = 0.0;   // meters, applied to x and y
  double pixel_sigma = 0.0;   // pixels
  double outlier_fraction = 0.0;
  uint64_t seed = 0;

  void validate() const {
    if (rot_z_sigma < 0.0 || trans_sigma < 0.0 || pixel_sigma < 0.0)
      fail("InvalidNoise", "noise sigmas must be non-negative");
    if (outlier_fraction < 0.0 || outlier_fraction > 1.0)
      fail("InvalidNoise", "outlier fraction must lie in [0, 1]");
  }
};

/// Ideal rectified rig. View (a, b) sits at lateral offset
/// ((b - ref_b), (a - ref_a)) * baseline from the reference camera, so its
/// pose translation is ((ref_b - b), (ref_a - a), 0) * baseline.
inline SyntheticRig make_rig(const ViewGrid& grid, int width, int height, double focal,
                             double baseline) {
  grid.validate();
  if (width < 1 || height < 1 || !(focal > 0.0) || !(baseline > 0.0))
    fail("InvalidRig", "rig dimensions, focal length and baseline must be positive");

  SyntheticRig rig;
  rig.grid = grid;
  rig.width = width;
  rig.height = height;
  rig.baseline = baseline;

  IntrinsicMatrix k;
  k.fx = k.fy = focal;
  k.cx = width / 2.0;
  k.cy = height / 2.0;
  k.skew = 0.0;

  for (int i = 0; i < grid.size(); ++i) {
    rig.k_true.push_back(k);
    rig.d_true.push_back(RadialDistortion::centered(0.0, 0.0, k));
    ViewPose pose;
    pose.tvec = Vec3((grid.ref_b - grid.col_of(i)) * baseline,
                     (grid.ref_a - grid.row_of(i)) * baseline, 0.0);
    rig.poses_true.push_back(pose);
  }
  return rig;
}

/// Adds pose noise: N(0, rot_z_sigma) to the Z component of each
/// non-reference rotation vector and N(0, trans_sigma) to the x and y of
/// each non-reference translation. The reference view is never touched.
inline SyntheticRig perturb_rig(const SyntheticRig& rig, const NoiseSpec& noise) {
  noise.validate();
  SyntheticRig out = rig;
  Rng rng(noise.seed);
  const int ref = rig.grid.reference_index();
  for (int i = 0; i < rig.grid.size(); ++i) {
    if (i == ref) continue;
    out.poses_true[i].rvec.z() += rng.normal(0.0, noise.rot_z_sigma);
    out.poses_true[i].tvec.x() += rng.normal(0.0, noise.trans_sigma);
    out.poses_true[i].tvec.y() += rng.normal(0.0, noise.trans_sigma);
  }
  return out;
}

namespace detail {

inline bool corner_visible(const SyntheticRig& rig, int view, const ViewPose& pattern_pose,
                           const WorldPoint& corner, double margin, PixelPoint* out = nullptr) {
  const Mat3 r_pat = rodrigues_to_matrix(pattern_pose.rvec);
  const Vec3 x_ref = r_pat * corner.vec() + pattern_pose.tvec;
  const Mat3 r_view = rodrigues_to_matrix(rig.poses_true[view].rvec);
  const Vec3 xc = r_view * x_ref + rig.poses_true[view].tvec;
  if (xc.z() <= 1e-6) return false;
  const IntrinsicMatrix& k = rig.k_true[view];
  const PixelPoint ideal{k.fx * xc.x() / xc.z() + k.cx, k.fy * xc.y() / xc.z() + k.cy};
  const PixelPoint px = apply_distortion(rig.d_true[view], ideal);
  if (out) *out = px;
  return px.x >= margin && px.x <= rig.width - 1 - margin && px.y >= margin &&
         px.y <= rig.height - 1 - margin;
}

}  // namespace detail

/// Quasi-random pattern placements that keep every corner visible in every
/// view: pattern centers cycle through a 3x3 cover of the reference image so
/// repeated placements spread over the field of view; orientations tilt up
/// to ~0.35 rad. Deterministic under the Rng state.
inline std::vector<ViewPose> make_pattern_placements(const SyntheticRig& rig,
                                                     const CheckerboardSpec& spec, int count,
                                                     Rng& rng, double depth_min = 0.0,
                                                     double depth_max = 0.0) {
  spec.validate();
  const std::vector<WorldPoint> corners = pattern_world_points(spec);
  const WorldPoint center{(spec.inner_cols - 1) * spec.square_size / 2.0,
                          (spec.inner_rows - 1) * spec.square_size / 2.0, 0.0};
  const IntrinsicMatrix& k = rig.k_true[rig.grid.reference_index()];

  // Default depth: pattern spans roughly a third of the image.
  const double pattern_width = (spec.inner_cols - 1) * spec.square_size;
  if (depth_min <= 0.0) depth_min = 2.4 * pattern_width * k.fx / rig.width;
  if (depth_max <= 0.0) depth_max = 1.8 * depth_min;

  std::vector<ViewPose> placements;
  int attempts = 0;
  while (static_cast<int>(placements.size()) < count) {
    if (++attempts > 200 * count + 1000)
      fail("PatternNotVisible", "could not place the pattern inside all views");

    const int cell = static_cast<int>(placements.size()) % 9;
    const double target_x = rig.width * (0.25 + 0.25 * (cell % 3)) + rng.uniform(-0.08, 0.08) * rig.width;
    const double target_y = rig.height * (0.25 + 0.25 * (cell / 3)) + rng.uniform(-0.08, 0.08) * rig.height;
    const double depth = rng.uniform(depth_min, depth_max);

    ViewPose pose;
    pose.rvec = Vec3(rng.uniform(-0.35, 0.35), rng.uniform(-0.35, 0.35), rng.uniform(-0.3, 0.3));
    const Vec3 target((target_x - k.cx) / k.fx * depth, (target_y - k.cy) / k.fy * depth, depth);
    pose.tvec = target - rodrigues_to_matrix(pose.rvec) * center.vec();

    bool visible = true;
    for (int view = 0; view < rig.grid.size() && visible; ++view)
      for (const auto& corner : corners)
        if (!detail::corner_visible(rig, view, pose, corner, 4.0)) {
          visible = false;
          break;
        }
    if (visible) placements.push_back(pose);
  }
  return placements;
}

/// Projects the pattern through every view for every placement, applying
/// forward distortion and then Gaussian pixel noise. Placements must keep
/// the pattern fully visible everywhere; the first violating placement is
/// reported in PatternNotVisible.
inline std::vector<PatternObservation> render_pattern_frames(const SyntheticRig& rig,
                                                             const CheckerboardSpec& spec,
                                                             const std::vector<ViewPose>& placements,
                                                             double pixel_sigma, uint64_t seed) {
  spec.validate();
  const std::vector<WorldPoint> corners = pattern_world_points(spec);
  Rng rng(seed);

  std::vector<PatternObservation> result;
  result.reserve(placements.size() * rig.grid.size());
  for (size_t f = 0; f < placements.size(); ++f) {
    for (int view = 0; view < rig.grid.size(); ++view) {
      PatternObservation obs;
      obs.view_index = view;
      obs.frame_index = static_cast<int>(f);
      obs.corners.reserve(corners.size());
      for (const auto& corner : corners) {
        PixelPoint px;
        if (!detail::corner_visible(rig, view, placements[f], corner, 0.0, &px))
          fail("PatternNotVisible",
               "placement " + std::to_string(f) + " leaves view " + std::to_string(view));
        obs.corners.push_back(px);
      }
      result.push_back(std::move(obs));
    }
  }
  // Noise after the visibility pass so the check is about geometry only.
  for (auto& obs : result)
    for (auto& c : obs.corners) {
      c.x += rng.normal(0.0, pixel_sigma);
      c.y += rng.normal(0.0, pixel_sigma);
    }
  return result;
}

/// One synthetic scene: tracks visible in all views with ground truth.
struct SceneTracks {
  std::vector<Track> tracks;
  std::vector<WorldPoint> ground_truth;
  std::vector<int> outlier_track_ids;         // tracks given a gross outlier
  std::vector<std::vector<PairMatch>> chain;  // pairwise matches along the chain
};

/// Random 3D points in the frustum shared by all views, projected with
/// pixel noise. outlier_fraction of the tracks get one non-reference
/// observation displaced by at least 20 px (uniformly random position);
/// those track ids are reported as labels. Pairwise chain matches are
/// emitted alongside for chain_match tests.
inline SceneTracks render_scene_tracks(const SyntheticRig& rig, int n_points, double depth_min,
                                       double depth_max, const NoiseSpec& noise) {
  noise.validate();
  if (n_points < 1) fail("EmptyFrustum", "need at least one point");
  if (!(depth_min > 0.0) || !(depth_max >= depth_min))
    fail("EmptyFrustum", "depth range must be positive and ordered");

  const int ref = rig.grid.reference_index();
  const IntrinsicMatrix& k = rig.k_true[ref];

  // Lateral camera spread determines how much margin the reference view
  // needs so that every view still sees the point.
  double spread = 0.0;
  for (const auto& pose : rig.poses_true)
    spread = std::max(spread, pose.tvec.head<2>().lpNorm<Eigen::Infinity>());
  const double margin = 8.0 + std::max(k.fx, k.fy) * spread / depth_min;
  if (2.0 * margin >= std::min(rig.width, rig.height))
    fail("EmptyFrustum", "views share no common field of view in this depth range");

  Rng rng(noise.seed);
  SceneTracks scene;

  for (int id = 0; id < n_points; ++id) {
    WorldPoint truth;
    std::vector<PixelPoint> obs(rig.grid.size());
    bool ok = false;
    for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
      const double z = rng.uniform(depth_min, depth_max);
      const double u = rng.uniform(margin, rig.width - margin);
      const double v = rng.uniform(margin, rig.height - margin);
      truth = {(u - k.cx) / k.fx * z, (v - k.cy) / k.fy * z, z};
      ok = true;
      for (int view = 0; view < rig.grid.size() && ok; ++view) {
        const Mat3 rot = rodrigues_to_matrix(rig.poses_true[view].rvec);
        const Vec3 xc = rot * truth.vec() + rig.poses_true[view].tvec;
        if (xc.z() <= 1e-6) {
          ok = false;
          break;
        }
        const IntrinsicMatrix& kv = rig.k_true[view];
        const PixelPoint ideal{kv.fx * xc.x() / xc.z() + kv.cx, kv.fy * xc.y() / xc.z() + kv.cy};
        const PixelPoint px = apply_distortion(rig.d_true[view], ideal);
        if (px.x < 1.0 || px.x > rig.width - 2.0 || px.y < 1.0 || px.y > rig.height - 2.0)
          ok = false;
        else
          obs[view] = px;
      }
    }
    if (!ok) fail("EmptyFrustum", "could not sample a point visible in all views");

    Track track;
    track.id = id;
    track.obs = obs;
    for (auto& p : track.obs) {
      p.x += rng.normal(0.0, noise.pixel_sigma);
      p.y += rng.normal(0.0, noise.pixel_sigma);
    }
    scene.tracks.push_back(track);
    scene.ground_truth.push_back(truth);
  }

  // Gross outliers: displace one non-reference observation far away.
  const int n_outliers = static_cast<int>(noise.outlier_fraction * n_points);
  for (int j = 0; j < n_outliers; ++j) {
    int id;
    do {
      id = static_cast<int>(rng.index(n_points));
    } while (std::find(scene.outlier_track_ids.begin(), scene.outlier_track_ids.end(), id) !=
             scene.outlier_track_ids.end());
    int view;
    do {
      view = static_cast<int>(rng.index(rig.grid.size()));
    } while (view == ref);
    PixelPoint& p = scene.tracks[id].obs[view];
    PixelPoint candidate;
    do {
      candidate = {rng.uniform(0.0, rig.width - 1.0), rng.uniform(0.0, rig.height - 1.0)};
    } while (distance(candidate, p) < 20.0);
    p = candidate;
    scene.outlier_track_ids.push_back(id);
  }
  std::sort(scene.outlier_track_ids.begin(), scene.outlier_track_ids.end());

  // Pairwise matches along the chain, exactly as a matcher would emit them.
  const std::vector<int> order = chain_order(rig.grid);
  scene.chain.resize(order.size() - 1);
  for (size_t s = 0; s + 1 < order.size(); ++s) {
    for (const auto& track : scene.tracks)
      scene.chain[s].push_back({track.obs[order[s]], track.obs[order[s + 1]]});
  }
  return scene;
}

}  // namespace lfcal
