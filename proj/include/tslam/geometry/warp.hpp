#pragma once

#include <vector>

#include <Eigen/Core>

#include "tslam/core/parallel.hpp"
#include "tslam/core/raster.hpp"
#include "tslam/geometry/camera.hpp"
#include "tslam/geometry/sampling.hpp"
#include "tslam/geometry/se3.hpp"

namespace tslam {

/// Source view resampled into the target frame.
struct WarpResult {
  ImageGray synthesized;     // I_s sampled at p_s for every target pixel
  Mask validity;             // V
  DepthMap projected_depth;  // z of the target point in the source frame
  DepthMap sampled_depth;    // source depth interpolated at p_s
  Raster<double> source_u;   // p_s, for diagnostics and Jacobians
  Raster<double> source_v;
};

inline void require_intrinsics_shape(const Intrinsics& k, int w, int h, const char* what) {
  if (k.width != w || k.height != h) {
    throw ShapeError(std::string(what) + ": raster does not match intrinsics dimensions");
  }
}

/// Inverse warp of the source image into the target frame using the target
/// depth and T_{t->s}. A pixel is valid iff its target depth is valid, the
/// transformed depth is positive, p_s lies inside the source raster, and all
/// four source depth neighbors are valid.
inline WarpResult inverse_warp(const ImageGray& source, const DepthMap& target_depth,
                               const PoseSE3& t_to_s, const Intrinsics& k,
                               const DepthMap& source_depth) {
  require_intrinsics_shape(k, source.width(), source.height(), "inverse_warp(source)");
  require_intrinsics_shape(k, target_depth.width(), target_depth.height(), "inverse_warp(target depth)");
  require_intrinsics_shape(k, source_depth.width(), source_depth.height(), "inverse_warp(source depth)");

  const int w = k.width, h = k.height;
  WarpResult out;
  out.synthesized = ImageGray(w, h, 0.0);
  out.validity = Mask(w, h, 0);
  out.projected_depth = DepthMap(w, h);
  out.sampled_depth = DepthMap(w, h);
  out.source_u = Raster<double>(w, h, 0.0);
  out.source_v = Raster<double>(w, h, 0.0);

  parallel_for(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      if (!target_depth.is_valid(x, y)) continue;
      const Projection pr = project_pixel({double(x), double(y)}, target_depth.depth(x, y), k, t_to_s);
      out.projected_depth.depth(x, y) = pr.z;
      if (!pr.valid) continue;
      out.source_u(x, y) = pr.pixel.u;
      out.source_v(x, y) = pr.pixel.v;
      const BilinearCell cell = locate_cell(w, h, pr.pixel);
      if (!cell.valid || !cell.all_valid(source_depth.valid)) continue;
      out.synthesized(x, y) = cell.interpolate(source);
      out.sampled_depth.depth(x, y) = cell.interpolate(source_depth.depth);
      out.sampled_depth.valid(x, y) = 1;
      out.projected_depth.valid(x, y) = 1;
      out.validity(x, y) = 1;
    }
  });
  return out;
}

/// One world-frame point per valid depth pixel, in row-major pixel order.
inline std::vector<Eigen::Vector3d> backproject_depth(const DepthMap& d, const Intrinsics& k,
                                                      const PoseSE3& world_from_camera) {
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(d.valid_count());
  for (int y = 0; y < d.height(); ++y) {
    for (int x = 0; x < d.width(); ++x) {
      if (!d.is_valid(x, y)) continue;
      pts.push_back(world_from_camera * (d.depth(x, y) * k.unproject({double(x), double(y)})));
    }
  }
  return pts;
}

}  // namespace tslam
