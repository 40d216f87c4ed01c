#pragma once

#include "lfcal/types.hpp"

#include <string>
#include <utility>
#include <vector>

namespace lfcal {

/// Planar checkerboard described by its inner-corner lattice.
struct CheckerboardSpec {
  int inner_cols = 0;
  int inner_rows = 0;
  double square_size = 0.0;  // meters

  int corner_count() const { return inner_cols * inner_rows; }

  void validate() const {
    if (inner_cols < 3 || inner_rows < 3)
      fail("InvalidPattern", "checkerboard needs at least 3x3 inner corners");
    if (!(square_size > 0.0)) fail("InvalidPattern", "square size must be positive");
  }
};

/// Detected corners of one pattern placement seen from one view.
/// Corners are row-major from the pattern origin corner.
struct PatternObservation {
  int view_index = 0;
  int frame_index = 0;
  std::vector<PixelPoint> corners;
};

/// Physical corner positions on the Z=0 pattern plane, row-major with the
/// first corner at the origin: index = row * inner_cols + col, position
/// (col, row) * square_size.
inline std::vector<WorldPoint> pattern_world_points(const CheckerboardSpec& spec) {
  spec.validate();
  std::vector<WorldPoint> points;
  points.reserve(spec.corner_count());
  for (int row = 0; row < spec.inner_rows; ++row)
    for (int col = 0; col < spec.inner_cols; ++col)
      points.push_back({col * spec.square_size, row * spec.square_size, 0.0});
  return points;
}

/// Checks the row-major corner ordering. A projective image of the lattice
/// keeps each row and column monotone along its own chord, and chords of
/// neighboring rows (and of neighboring columns) cannot reverse direction,
/// so every violation marks a mislabeled detection. The neighbor-chord check
/// matters: a fully reversed row is monotone along its own reversed chord.
/// Throws BadCornerOrder naming the first offending row or column.
inline void validate_corner_sweep(const CheckerboardSpec& spec,
                                  const std::vector<PixelPoint>& corners) {
  if (static_cast<int>(corners.size()) != spec.corner_count())
    fail("BadCornerOrder", "corner count does not match the pattern");
  const auto at = [&](int row, int col) -> const PixelPoint& {
    return corners[row * spec.inner_cols + col];
  };
  const auto chord = [](const PixelPoint& first, const PixelPoint& last) {
    return std::pair<double, double>{last.x - first.x, last.y - first.y};
  };

  std::pair<double, double> prev_chord{0.0, 0.0};
  for (int row = 0; row < spec.inner_rows; ++row) {
    const auto [cx, cy] = chord(at(row, 0), at(row, spec.inner_cols - 1));
    for (int col = 0; col + 1 < spec.inner_cols; ++col) {
      const PixelPoint& a = at(row, col);
      const PixelPoint& b = at(row, col + 1);
      if ((b.x - a.x) * cx + (b.y - a.y) * cy <= 0.0)
        fail("BadCornerOrder",
             "corners do not sweep monotonically in pattern row " + std::to_string(row));
    }
    if (row > 0 && prev_chord.first * cx + prev_chord.second * cy <= 0.0)
      fail("BadCornerOrder", "pattern row " + std::to_string(row) +
                                 " sweeps against the direction of the row above");
    prev_chord = {cx, cy};
  }

  prev_chord = {0.0, 0.0};
  for (int col = 0; col < spec.inner_cols; ++col) {
    const auto [cx, cy] = chord(at(0, col), at(spec.inner_rows - 1, col));
    for (int row = 0; row + 1 < spec.inner_rows; ++row) {
      const PixelPoint& a = at(row, col);
      const PixelPoint& b = at(row + 1, col);
      if ((b.x - a.x) * cx + (b.y - a.y) * cy <= 0.0)
        fail("BadCornerOrder",
             "corners do not sweep monotonically in pattern column " + std::to_string(col));
    }
    if (col > 0 && prev_chord.first * cx + prev_chord.second * cy <= 0.0)
      fail("BadCornerOrder", "pattern column " + std::to_string(col) +
                                 " sweeps against the direction of the column to its left");
    prev_chord = {cx, cy};
  }
}

}  // namespace lfcal
