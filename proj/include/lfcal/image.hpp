#pragma once

#include "lfcal/parallel.hpp"
#include "lfcal/rectify.hpp"
#include "lfcal/types.hpp"

#include <cmath>
#include <vector>

namespace lfcal {

/// Row-major raster with interleaved channels (1 = grayscale, 3 = RGB).
/// Values carry whatever scale the producer used; remapping only
/// interpolates, so no range is assumed.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c = 1)
      : width(w), height(h), channels(c), data(static_cast<size_t>(w) * h * c, 0.0) {
    if (w < 1 || h < 1 || (c != 1 && c != 3))
      fail("InvalidImage", "image needs positive dimensions and 1 or 3 channels");
  }

  double& at(int x, int y, int c = 0) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  double at(int x, int y, int c = 0) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
};

/// Applies a destination->source lookup table with bilinear sampling.
/// Sentinel entries (and any source outside the sampleable area) produce 0.
/// Throws DimensionMismatch when the image and table disagree in size.
inline Image remap_image(const Image& src, const LookupTable& lut) {
  if (src.width != lut.width || src.height != lut.height)
    fail("DimensionMismatch", "image and lookup table dimensions differ");
  Image out(src.width, src.height, src.channels);
  parallel_for(src.height, [&](int y) {
    for (int x = 0; x < src.width; ++x) {
      const PixelPoint& s = lut.at(x, y);
      if (LookupTable::is_sentinel(s)) continue;
      if (s.x < 0.0 || s.x > src.width - 1.0 || s.y < 0.0 || s.y > src.height - 1.0) continue;
      const int x0 = static_cast<int>(std::floor(s.x));
      const int y0 = static_cast<int>(std::floor(s.y));
      const int x1 = std::min(x0 + 1, src.width - 1);
      const int y1 = std::min(y0 + 1, src.height - 1);
      const double fx = s.x - x0;
      const double fy = s.y - y0;
      for (int c = 0; c < src.channels; ++c) {
        const double top = (1.0 - fx) * src.at(x0, y0, c) + fx * src.at(x1, y0, c);
        const double bottom = (1.0 - fx) * src.at(x0, y1, c) + fx * src.at(x1, y1, c);
        out.at(x, y, c) = (1.0 - fy) * top + fy * bottom;
      }
    }
  });
  return out;
}

}  // namespace lfcal
