#pragma once

#include "lfcal/projection.hpp"
#include "lfcal/rectify.hpp"
#include "lfcal/refine.hpp"
#include "lfcal/synthetic.hpp"

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

namespace lfcal {

enum class NoiseKind { translation, rotation_z };

inline const char* noise_kind_name(NoiseKind kind) {
  return kind == NoiseKind::translation ? "translation" : "rotation_z";
}

/// One trial of the sweep. rms_before/rms_after are the refinement's own
/// reprojection RMS; rect_error is the RMS epipolar misalignment of the
/// final rectified light field (same-row pairs compared in y, same-column
/// pairs in x, over the scene's ground-truth points). Refinement absorbs
/// rig noise almost completely, so rect_error is the quantity that actually
/// responds to it: linearly for lens shifts (a center offset cannot be
/// remapped away), flat for small rotations (a homography cancels them).
struct SweepRow {
  NoiseKind kind = NoiseKind::translation;
  double level = 0.0;
  int trial = 0;
  double rms_before = 0.0;
  double rms_after = 0.0;
  double rect_error = 0.0;
};

/// Refinement settings suited to noise experiments: every trial re-fits
/// from the nominal rig at an arbitrary noise level, so the stage budgets
/// are raised, and the anchor is strengthened so wander along unobservable
/// directions does not pollute the per-trial statistics.
inline RefineConfig sweep_refine_defaults() {
  RefineConfig c;
  c.stage_iterations = {300, 300, 300};
  c.anchor_weight = 1e-4;
  return c;
}

struct SweepConfig {
  int n_points = 150;
  double depth_min = 2.0;
  double depth_max = 4.0;
  double pixel_sigma = 0.0;  // observation noise shared by every trial
  std::uint64_t seed = 0;
  RefineConfig refine = sweep_refine_defaults();
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t label) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (label + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// RMS epipolar misalignment of the delivered rectified light field: over
/// the scene's points, same-row view pairs compare rectified y and
/// same-column pairs rectified x. Each remapped view shows the true capture
/// K_true [R_true | t_true] carried back through the estimated model's
/// homography K_r r_bar K_est^-1; the composition is exact because
/// refinement holds distortion fixed, so it cancels between capture and
/// remap. Pairwise differences are what depth estimation sees, and they are
/// invariant to the directions a light field cannot pin down (a common
/// image-plane stretch rescales both sides of a pair). Lens shifts move
/// camera centers off the grid, which no remap undoes, so this grows with
/// translation noise; small rotations are absorbed by the homography.
inline double rectified_misalignment(const RectificationResult& rect,
                                     const LightFieldCalibration& estimated,
                                     const SyntheticRig& rig_true,
                                     const std::vector<WorldPoint>& points) {
  const Mat3 k = rect.k_r.matrix();
  const int n = rig_true.grid.size();
  std::vector<ProjectionMatrix> content(n);
  for (int i = 0; i < n; ++i) {
    const Mat3 carry = k * rect.per_view_r_bar[i] *
                       estimated.per_view[i].k.matrix().inverse() * rig_true.k_true[i].matrix();
    content[i].leftCols<3>() = carry * rodrigues_to_matrix(rig_true.poses_true[i].rvec);
    content[i].col(3) = carry * rig_true.poses_true[i].tvec;
  }
  double total_sq = 0.0;
  std::size_t count = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const bool same_row = rig_true.grid.row_of(i) == rig_true.grid.row_of(j);
      const bool same_col = rig_true.grid.col_of(i) == rig_true.grid.col_of(j);
      if (!same_row && !same_col) continue;
      for (const auto& x : points) {
        const PixelPoint a = project_point(content[i], x);
        const PixelPoint b = project_point(content[j], x);
        const double d = same_row ? a.y - b.y : a.x - b.x;
        total_sq += d * d;
        ++count;
      }
    }
  }
  return count ? std::sqrt(total_sq / static_cast<double>(count)) : 0.0;
}

}  // namespace detail

/// Noise-response experiment: for each level and trial, perturb the rig by
/// the given kind of capture noise, render a frame of tracks from the bent
/// rig, refine starting from the nominal calibration, rectify the refined
/// model, and record the errors. Every trial owns an RNG stream derived
/// from (seed, kind, level index, trial), so rows are reproducible and
/// order-independent.
inline std::vector<SweepRow> noise_sweep(const SyntheticRig& rig, NoiseKind kind,
                                         const std::vector<double>& levels, int trials,
                                         const SweepConfig& config = {}) {
  rig.grid.validate();
  if (levels.empty()) fail("EmptyInput", "noise sweep needs at least one level");
  if (trials < 1) fail("EmptyInput", "noise sweep needs at least one trial");

  std::vector<SweepRow> rows;
  rows.reserve(levels.size() * static_cast<std::size_t>(trials));
  for (std::size_t li = 0; li < levels.size(); ++li) {
    for (int trial = 0; trial < trials; ++trial) {
      const std::uint64_t label =
          (static_cast<std::uint64_t>(li) * 2 + (kind == NoiseKind::rotation_z ? 1 : 0)) * 1000 +
          static_cast<std::uint64_t>(trial);
      const std::uint64_t stream = detail::mix_seed(config.seed, label);

      NoiseSpec rig_noise;
      if (kind == NoiseKind::translation)
        rig_noise.trans_sigma = levels[li];
      else
        rig_noise.rot_z_sigma = levels[li];
      rig_noise.seed = stream;
      const SyntheticRig bent = perturb_rig(rig, rig_noise);

      NoiseSpec obs_noise;
      obs_noise.pixel_sigma = config.pixel_sigma;
      obs_noise.seed = detail::mix_seed(stream, 1);
      const SceneTracks scene =
          render_scene_tracks(bent, config.n_points, config.depth_min, config.depth_max, obs_noise);

      RefineConfig refine_config = config.refine;
      refine_config.seed = detail::mix_seed(stream, 2);
      const RefinementResult refined = refine({scene.chain}, rig.as_calibration(), refine_config);

      const RectificationResult rect =
          rectified_projections(refined.calibration, rig.width, rig.height);

      SweepRow row;
      row.kind = kind;
      row.level = levels[li];
      row.trial = trial;
      row.rms_before = refined.rms_before;
      row.rms_after = refined.rms_after;
      row.rect_error =
          detail::rectified_misalignment(rect, refined.calibration, bent, scene.ground_truth);
      rows.push_back(row);
    }
  }
  return rows;
}

/// Mean rect_error per level, in the order the levels were swept.
inline std::vector<double> sweep_level_means(const std::vector<SweepRow>& rows) {
  std::vector<double> levels;
  std::vector<double> sums;
  std::vector<int> counts;
  for (const auto& row : rows) {
    std::size_t li = 0;
    while (li < levels.size() && levels[li] != row.level) ++li;
    if (li == levels.size()) {
      levels.push_back(row.level);
      sums.push_back(0.0);
      counts.push_back(0);
    }
    sums[li] += row.rect_error;
    ++counts[li];
  }
  for (std::size_t li = 0; li < sums.size(); ++li) sums[li] /= counts[li];
  return sums;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "noise_kind,level,trial,rms_before,rms_after,rect_error\n";
  out.precision(17);
  for (const auto& row : rows) {
    out << noise_kind_name(row.kind) << ',' << row.level << ',' << row.trial << ','
        << row.rms_before << ',' << row.rms_after << ',' << row.rect_error << '\n';
  }
  return out.str();
}

}  // namespace lfcal
