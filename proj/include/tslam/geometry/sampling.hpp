#pragma once

#include <array>
#include <cmath>

#include "tslam/core/raster.hpp"
#include "tslam/geometry/camera.hpp"

namespace tslam {

/// The interpolation cell for a continuous coordinate: top-left neighbor
/// (x0, y0) and the fractional offsets inside the cell.
struct BilinearCell {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double a = 0.0;  // horizontal fraction
  double b = 0.0;  // vertical fraction
  bool valid = false;

  /// Weights ordered top-left, top-right, bottom-left, bottom-right.
  std::array<double, 4> weights() const {
    return {(1.0 - a) * (1.0 - b), a * (1.0 - b), (1.0 - a) * b, a * b};
  }

  template <typename T>
  double interpolate(const Raster<T>& r) const {
    const auto w = weights();
    return w[0] * r(x0, y0) + w[1] * r(x1, y0) + w[2] * r(x0, y1) + w[3] * r(x1, y1);
  }

  /// Partial derivatives of the bilinear interpolant inside this cell.
  template <typename T>
  void gradient(const Raster<T>& r, double& du, double& dv) const {
    const double i00 = r(x0, y0), i10 = r(x1, y0), i01 = r(x0, y1), i11 = r(x1, y1);
    du = (1.0 - b) * (i10 - i00) + b * (i11 - i01);
    dv = (1.0 - a) * (i01 - i00) + a * (i11 - i10);
  }

  bool all_valid(const Mask& m) const {
    return m(x0, y0) && m(x1, y0) && m(x0, y1) && m(x1, y1);
  }
};

/// A sample is valid iff all four neighbors lie inside the raster, i.e.
/// u in [0, W-1] and v in [0, H-1]. On the last column/row the cell is shifted
/// one pixel inwards so lattice points there still interpolate exactly.
inline BilinearCell locate_cell(int width, int height, const PixelCoord& p) {
  BilinearCell c;
  if (!(p.u >= 0.0 && p.v >= 0.0 && p.u <= width - 1 && p.v <= height - 1)) return c;
  c.x0 = static_cast<int>(std::floor(p.u));
  c.y0 = static_cast<int>(std::floor(p.v));
  if (c.x0 >= width - 1) c.x0 = width >= 2 ? width - 2 : 0;
  if (c.y0 >= height - 1) c.y0 = height >= 2 ? height - 2 : 0;
  c.x1 = width >= 2 ? c.x0 + 1 : c.x0;
  c.y1 = height >= 2 ? c.y0 + 1 : c.y0;
  c.a = p.u - c.x0;
  c.b = p.v - c.y0;
  c.valid = true;
  return c;
}

struct SampleResult {
  double value = 0.0;
  std::array<double, 4> weights{0.0, 0.0, 0.0, 0.0};
  bool valid = false;
};

/// Bilinear interpolation of the four neighbors of p. Out-of-bounds samples
/// are invalid with value 0.
inline SampleResult bilinear_sample(const ImageGray& img, const PixelCoord& p) {
  SampleResult out;
  const BilinearCell cell = locate_cell(img.width(), img.height(), p);
  if (!cell.valid) return out;
  out.weights = cell.weights();
  out.value = cell.interpolate(img);
  out.valid = true;
  return out;
}

/// Depth variant: additionally requires all four neighbor depths valid.
inline SampleResult bilinear_sample(const DepthMap& d, const PixelCoord& p) {
  SampleResult out;
  const BilinearCell cell = locate_cell(d.width(), d.height(), p);
  if (!cell.valid || !cell.all_valid(d.valid)) return out;
  out.weights = cell.weights();
  out.value = cell.interpolate(d.depth);
  out.valid = true;
  return out;
}

}  // namespace tslam
