#pragma once

#include <string>
#include <vector>

#include "tslam/core/error.hpp"
#include "tslam/core/raster.hpp"

namespace tslam {

/// Halves each dimension (floor) by 2x2 box averaging.
inline ImageGray downsample_box(const ImageGray& img) {
  const int w = img.width() / 2, h = img.height() / 2;
  ImageGray out(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out(x, y) = 0.25 * (img(2 * x, 2 * y) + img(2 * x + 1, 2 * y) + img(2 * x, 2 * y + 1) +
                          img(2 * x + 1, 2 * y + 1));
    }
  }
  return out;
}

/// Depth counterpart: a coarse pixel is valid only if all four parents are.
inline DepthMap downsample_box(const DepthMap& d) {
  const int w = d.width() / 2, h = d.height() / 2;
  DepthMap out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int x0 = 2 * x, y0 = 2 * y;
      if (!d.is_valid(x0, y0) || !d.is_valid(x0 + 1, y0) || !d.is_valid(x0, y0 + 1) || !d.is_valid(x0 + 1, y0 + 1)) {
        continue;
      }
      out.set(x, y, 0.25 * (d.depth(x0, y0) + d.depth(x0 + 1, y0) + d.depth(x0, y0 + 1) + d.depth(x0 + 1, y0 + 1)));
    }
  }
  return out;
}

inline void check_pyramid_levels(int width, int height, int levels) {
  if (levels < 1) throw InvalidArgument("pyramid: levels must be >= 1");
  const long long need = 1LL << (levels - 1);
  if (width < need || height < need) {
    throw InvalidArgument("pyramid: " + std::to_string(width) + "x" + std::to_string(height) +
                          " raster too small for " + std::to_string(levels) + " levels");
  }
}

/// Level 0 is the input; level i+1 is the 2x2 box average of level i.
template <typename RasterT>
std::vector<RasterT> build_pyramid(const RasterT& img, int levels) {
  check_pyramid_levels(img.width(), img.height(), levels);
  std::vector<RasterT> out;
  out.reserve(levels);
  out.push_back(img);
  for (int i = 1; i < levels; ++i) out.push_back(downsample_box(out.back()));
  return out;
}

}  // namespace tslam
