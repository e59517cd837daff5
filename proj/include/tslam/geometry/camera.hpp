#pragma once

#include <cmath>
#include <string>

#include <Eigen/Core>

#include "tslam/core/error.hpp"
#include "tslam/geometry/se3.hpp"

namespace tslam {

/// Continuous pixel coordinate; pixel (i, j) is located exactly at (i, j).
struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

/// Pinhole intrinsics without distortion.
struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidArgument("intrinsics: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw InvalidArgument("intrinsics: raster dimensions must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
      throw InvalidArgument("intrinsics: principal point outside the raster");
    }
  }

  /// Intrinsics for the next pyramid level produced by 2x2 box averaging:
  /// level pixel i covers parent pixels 2i and 2i+1, centered at 2i + 0.5.
  Intrinsics half_resolution() const {
    Intrinsics k;
    k.fx = 0.5 * fx;
    k.fy = 0.5 * fy;
    k.cx = 0.5 * (cx - 0.5);
    k.cy = 0.5 * (cy - 0.5);
    k.width = width / 2;
    k.height = height / 2;
    return k;
  }

  /// Default synthetic camera for a w x h raster: f = w/2, centered principal
  /// point.
  static Intrinsics centered(int w, int h) {
    Intrinsics k;
    k.fx = k.fy = 0.5 * w;
    k.cx = 0.5 * (w - 1);
    k.cy = 0.5 * (h - 1);
    k.width = w;
    k.height = h;
    return k;
  }

  /// Ray through pixel p scaled so its z component is 1.
  Eigen::Vector3d unproject(const PixelCoord& p) const {
    return {(p.u - cx) / fx, (p.v - cy) / fy, 1.0};
  }

  PixelCoord project(const Eigen::Vector3d& x) const {
    return {fx * x.x() / x.z() + cx, fy * x.y() / x.z() + cy};
  }
};

/// Minimum camera-frame depth for a point to count as in front of the camera.
inline constexpr double kMinValidDepth = 1e-9;

struct Projection {
  PixelCoord pixel;
  double z = 0.0;  // depth of the point in the destination frame
  bool valid = false;
};

/// Back-projects p_t at the given depth, transforms by t_to_s and reprojects.
/// Invalid when the transformed depth is <= 1e-9.
inline Projection project_pixel(const PixelCoord& p_t, double depth, const Intrinsics& k,
                                const PoseSE3& t_to_s) {
  const Eigen::Vector3d x = t_to_s * (depth * k.unproject(p_t));
  Projection out;
  out.z = x.z();
  if (!(x.z() > kMinValidDepth)) return out;
  out.pixel = k.project(x);
  out.valid = std::isfinite(out.pixel.u) && std::isfinite(out.pixel.v);
  return out;
}

}  // namespace tslam
