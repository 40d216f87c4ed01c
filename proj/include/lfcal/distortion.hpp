#pragma once

#include "lfcal/types.hpp"

#include <cmath>

namespace lfcal {

namespace detail {

/// Radial gain 1 + k1 r^2 + k2 r^4 evaluated at squared radius r2.
inline double radial_gain(const RadialDistortion& d, double r2) {
  return 1.0 + r2 * (d.k1 + r2 * d.k2);
}

}  // namespace detail

/// Ideal -> distorted: scale the offset from the distortion center by the
/// radial gain evaluated at the input radius. Closed form, no iteration.
inline PixelPoint apply_distortion(const RadialDistortion& d, const PixelPoint& ideal) {
  const double dx = ideal.x - d.center_x;
  const double dy = ideal.y - d.center_y;
  const double gain = detail::radial_gain(d, dx * dx + dy * dy);
  return {d.center_x + dx * gain, d.center_y + dy * gain};
}

/// Distorted -> ideal: fixed-point iteration p_{k+1} = c + (q - c) / gain(|p_k - c|),
/// started at the observation itself. Converges for moderate distortion;
/// throws NoConvergence after 50 iterations without reaching 1e-9 px.
inline PixelPoint remove_distortion(const RadialDistortion& d, const PixelPoint& distorted) {
  if (d.is_identity()) return distorted;
  const double qx = distorted.x - d.center_x;
  const double qy = distorted.y - d.center_y;
  double px = qx;
  double py = qy;
  for (int iter = 0; iter < 50; ++iter) {
    const double gain = detail::radial_gain(d, px * px + py * py);
    if (gain == 0.0 || !std::isfinite(gain))
      fail("NoConvergence", "radial gain collapsed while undistorting");
    const double nx = qx / gain;
    const double ny = qy / gain;
    const double step = std::hypot(nx - px, ny - py);
    px = nx;
    py = ny;
    if (step < 1e-9) return {d.center_x + px, d.center_y + py};
  }
  fail("NoConvergence", "undistortion fixed point did not converge in 50 iterations");
}

}  // namespace lfcal
