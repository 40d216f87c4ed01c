#pragma once

#include "lfcal/types.hpp"

#include <sstream>
#include <string>
#include <vector>

namespace lfcal {

/// How a disparity error E maps to a depth error at true disparity d.
/// one_sided:  dz = f b / d - f b / (d + E), the depth loss when the
///             measured disparity overshoots by E.
/// symmetric:  dz = f b / (d - E) - f b / (d + E), the full width of the
///             depth interval covered by disparities within +-E.
enum class DepthErrorVariant { one_sided, symmetric };

struct DepthErrorRow {
  double z = 0.0;          // meters
  double disparity = 0.0;  // pixels, d = f b / z
  double delta_z = 0.0;    // meters
};

/// Depth-error response over a linear sweep of true depths. `steps` points
/// cover [z_min, z_max] inclusive; one step pins the sweep at z_min.
inline std::vector<DepthErrorRow> depth_error_table(double focal, double baseline,
                                                    double reproj_error, double z_min,
                                                    double z_max, int steps,
                                                    DepthErrorVariant variant =
                                                        DepthErrorVariant::one_sided) {
  if (!(focal > 0.0) || !(baseline > 0.0))
    fail("InvalidRange", "focal length and baseline must be positive");
  if (reproj_error < 0.0) fail("InvalidRange", "reprojection error must be non-negative");
  if (!(z_min > 0.0) || !(z_max >= z_min)) fail("InvalidRange", "depth range must be positive and ordered");
  if (steps < 1) fail("InvalidRange", "need at least one depth step");

  const double fb = focal * baseline;
  std::vector<DepthErrorRow> rows;
  rows.reserve(static_cast<size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    DepthErrorRow row;
    row.z = steps == 1 ? z_min : z_min + (z_max - z_min) * i / static_cast<double>(steps - 1);
    row.disparity = fb / row.z;
    if (variant == DepthErrorVariant::one_sided) {
      row.delta_z = fb / row.disparity - fb / (row.disparity + reproj_error);
    } else {
      if (row.disparity - reproj_error <= 0.0)
        fail("InvalidRange", "disparity " + std::to_string(row.disparity) +
                                 " px is not resolvable against an error of " +
                                 std::to_string(reproj_error) + " px");
      row.delta_z = fb / (row.disparity - reproj_error) - fb / (row.disparity + reproj_error);
    }
    rows.push_back(row);
  }
  return rows;
}

inline std::string depth_error_csv(const std::vector<DepthErrorRow>& rows) {
  std::ostringstream out;
  out << "z,disparity,delta_z\n";
  out.precision(17);
  for (const DepthErrorRow& row : rows)
    out << row.z << ',' << row.disparity << ',' << row.delta_z << '\n';
  return out.str();
}

}  // namespace lfcal
