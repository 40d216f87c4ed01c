#pragma once

#include "lfcal/calibrate.hpp"
#include "lfcal/distortion.hpp"
#include "lfcal/fundamental.hpp"
#include "lfcal/projection.hpp"
#include "lfcal/triangulation.hpp"
#include "lfcal/types.hpp"

#include <algorithm>
#include <map>
#include <utility>
#include <vector>

namespace lfcal {

/// One scene feature's observations across the view grid. A finished track
/// has every view present; partially tracked candidates carry `present`
/// flags until the chain stage drops them.
struct Track {
  int id = 0;
  std::vector<PixelPoint> obs;  // indexed by view
  std::vector<bool> present;    // empty means all present
  bool has_x = false;
  WorldPoint x;

  bool complete() const {
    if (present.empty()) return !obs.empty();
    return std::all_of(present.begin(), present.end(), [](bool b) { return b; });
  }
};

/// One correspondence between two specific views.
struct PairMatch {
  PixelPoint a;
  PixelPoint b;
};

struct FilterReport {
  int input_count = 0;
  int after_dedup = 0;
  int after_chain = 0;
  int after_epipolar = 0;
  int after_triangulation = 0;
  double median_reproj = 0.0;
};

/// Boustrophedon visiting order over the grid, starting at the reference
/// view: the reference row is swept rightward from the reference column
/// (wrapping back over any columns left of it), then rows above are taken
/// bottom-up, then rows below top-down, each swept opposite to the previous
/// sweep so consecutive views stay adjacent whenever the reference sits on
/// the grid border.
inline std::vector<int> chain_order(const ViewGrid& grid) {
  grid.validate();
  std::vector<int> rows;
  rows.push_back(grid.ref_a);
  for (int a = grid.ref_a - 1; a >= 0; --a) rows.push_back(a);
  for (int a = grid.ref_a + 1; a < grid.rows_a; ++a) rows.push_back(a);

  std::vector<int> order;
  order.reserve(grid.size());
  bool left_to_right = true;
  for (size_t r = 0; r < rows.size(); ++r) {
    const int a = rows[r];
    if (r == 0) {
      for (int b = grid.ref_b; b < grid.cols_b; ++b) order.push_back(grid.index_of(a, b));
      for (int b = grid.ref_b - 1; b >= 0; --b) order.push_back(grid.index_of(a, b));
      // The first row ends at column 0 when ref_b > 0, else at the right
      // edge; the next row sweeps away from where this one ended.
      left_to_right = grid.ref_b > 0;
    } else {
      if (left_to_right)
        for (int b = 0; b < grid.cols_b; ++b) order.push_back(grid.index_of(a, b));
      else
        for (int b = grid.cols_b - 1; b >= 0; --b) order.push_back(grid.index_of(a, b));
      left_to_right = !left_to_right;
    }
  }
  return order;
}

/// Mask of points that survive greedy nearest-neighbour deduplication:
/// a point is kept iff it is at least `threshold` away from every
/// earlier-listed kept point.
inline std::vector<bool> deduplication_mask(const std::vector<PixelPoint>& points,
                                            double threshold) {
  if (!(threshold > 0.0)) fail("InvalidThreshold", "deduplication threshold must be positive");
  std::vector<bool> keep(points.size(), true);
  for (size_t i = 0; i < points.size(); ++i) {
    for (size_t j = 0; j < i && keep[i]; ++j)
      if (keep[j] && distance(points[i], points[j]) < threshold) keep[i] = false;
  }
  return keep;
}

inline std::vector<PixelPoint> deduplicate_features(const std::vector<PixelPoint>& points,
                                                    double threshold = std::sqrt(2.0)) {
  const std::vector<bool> keep = deduplication_mask(points, threshold);
  std::vector<PixelPoint> out;
  out.reserve(points.size());
  for (size_t i = 0; i < points.size(); ++i)
    if (keep[i]) out.push_back(points[i]);
  return out;
}

/// Composes per-pair matches into full tracks by following each reference
/// feature along the chain. A feature survives only if every hop exists and
/// is unambiguous (a coordinate with several distinct outgoing matches is
/// dropped). Throws EmptyChain when any adjacent pair has no matches.
inline std::vector<Track> chain_match(const std::vector<std::vector<PairMatch>>& pairwise,
                                      const ViewGrid& grid) {
  const std::vector<int> order = chain_order(grid);
  if (pairwise.size() != order.size() - 1)
    fail("SizeMismatch", "need exactly one match list per adjacent view pair along the chain");
  for (size_t s = 0; s < pairwise.size(); ++s)
    if (pairwise[s].empty())
      fail("EmptyChain", "no matches between chain views " + std::to_string(order[s]) + " and " +
                             std::to_string(order[s + 1]));

  using Key = std::pair<double, double>;
  struct Hop {
    PixelPoint target;
    bool ambiguous = false;
  };
  std::vector<std::map<Key, Hop>> hops(pairwise.size());
  for (size_t s = 0; s < pairwise.size(); ++s) {
    for (const auto& m : pairwise[s]) {
      const Key key{m.a.x, m.a.y};
      auto it = hops[s].find(key);
      if (it == hops[s].end()) {
        hops[s].emplace(key, Hop{m.b, false});
      } else if (it->second.target.x != m.b.x || it->second.target.y != m.b.y) {
        it->second.ambiguous = true;
      }
    }
  }

  std::vector<Track> tracks;
  int next_id = 0;
  for (const auto& start : pairwise[0]) {
    Track track;
    track.obs.assign(grid.size(), PixelPoint{});
    track.obs[order[0]] = start.a;
    PixelPoint cursor = start.a;
    bool alive = true;
    for (size_t s = 0; s < pairwise.size() && alive; ++s) {
      const auto it = hops[s].find(Key{cursor.x, cursor.y});
      if (it == hops[s].end() || it->second.ambiguous) {
        alive = false;
        break;
      }
      cursor = it->second.target;
      track.obs[order[s + 1]] = cursor;
    }
    if (!alive) continue;
    // A start coordinate may repeat in the match list; keep the first.
    const bool duplicate = std::any_of(tracks.begin(), tracks.end(), [&](const Track& t) {
      return t.obs[order[0]].x == start.a.x && t.obs[order[0]].y == start.a.y;
    });
    if (duplicate) continue;
    track.id = next_id++;
    tracks.push_back(std::move(track));
  }
  return tracks;
}

/// Drops tracks failing the epipolar test for any adjacent view pair along
/// the chain; the fundamental matrix of each pair is estimated by RANSAC
/// from the tracks themselves.
inline std::vector<Track> epipolar_filter(const std::vector<Track>& tracks, const ViewGrid& grid,
                                          double threshold = 2.0, uint64_t seed = 0) {
  if (tracks.size() < 8)
    fail("InsufficientMatches", "epipolar filtering needs at least 8 tracks");
  const std::vector<int> order = chain_order(grid);

  std::vector<bool> keep(tracks.size(), true);
  for (size_t s = 0; s + 1 < order.size(); ++s) {
    std::vector<PixelPoint> p1, p2;
    p1.reserve(tracks.size());
    p2.reserve(tracks.size());
    for (const auto& t : tracks) {
      p1.push_back(t.obs[order[s]]);
      p2.push_back(t.obs[order[s + 1]]);
    }
    const FundamentalResult fr = estimate_fundamental_ransac(p1, p2, threshold, seed + s);
    for (size_t i = 0; i < tracks.size(); ++i)
      if (!fr.inliers[i]) keep[i] = false;
  }

  std::vector<Track> out;
  for (size_t i = 0; i < tracks.size(); ++i)
    if (keep[i]) out.push_back(tracks[i]);
  return out;
}

/// Triangulates every track through the original projection matrices
/// (undistorted observations), measures the reprojection distance in the
/// reference view, and keeps tracks at or below the median distance. The
/// kept tracks carry their triangulated point. Returns the kept tracks and
/// the median distance.
inline std::pair<std::vector<Track>, double> triangulation_filter(
    const std::vector<Track>& tracks, const LightFieldCalibration& calib) {
  if (tracks.size() < 2) fail("InsufficientTracks", "median filtering needs at least 2 tracks");
  const int n_views = calib.grid.size();
  const int ref = calib.grid.reference_index();

  std::vector<ProjectionMatrix> cameras(n_views);
  for (int i = 0; i < n_views; ++i)
    cameras[i] = projection_matrix(calib.per_view[i].k, calib.poses_rel_reference[i]);

  std::vector<Track> work = tracks;
  std::vector<double> dist(tracks.size());
  for (size_t t = 0; t < work.size(); ++t) {
    std::vector<PixelPoint> undist(n_views);
    for (int i = 0; i < n_views; ++i)
      undist[i] = remove_distortion(calib.per_view[i].d, work[t].obs[i]);
    const WorldPoint x = triangulate_point(cameras, undist);
    work[t].x = x;
    work[t].has_x = true;
    dist[t] = distance(project_point(cameras[ref], x), undist[ref]);
  }

  std::vector<double> sorted = dist;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[(sorted.size() - 1) / 2];

  std::vector<Track> kept;
  for (size_t t = 0; t < work.size(); ++t)
    if (dist[t] <= median) kept.push_back(work[t]);
  return {kept, median};
}

}  // namespace lfcal
