#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "tslam/core/error.hpp"
#include "tslam/core/raster.hpp"
#include "tslam/geometry/warp.hpp"
#include "tslam/objective/ssim.hpp"

namespace tslam {

struct LossWeights {
  double lambda_pm = 0.15;  // L1 share of the photometric term; SSIM gets the rest
  double lambda_gc = 0.5;
  double lambda_sm = 0.1;

  void validate() const {
    if (!(lambda_pm >= 0.0 && lambda_pm <= 1.0)) throw InvalidArgument("loss: lambda_pm must be in [0, 1]");
    if (!(lambda_gc >= 0.0) || !(lambda_sm >= 0.0)) throw InvalidArgument("loss: weights must be non-negative");
  }
};

/// V, M_a and M_sd for one warped pair.
struct MaskStack {
  Mask validity;
  Mask auto_mask;
  Raster<double> dynamic_mask;  // in [0, 1]

  /// All-pass stack: everything valid, auto-mask on, unit dynamic weights.
  static MaskStack all_pass(int w, int h) {
    return {Mask(w, h, 1), Mask(w, h, 1), Raster<double>(w, h, 1.0)};
  }
};

struct LossBreakdown {
  double l_rec = 0.0;
  double l_gc = 0.0;
  double l_sm = 0.0;
  double l_total = 0.0;
  std::size_t valid_count = 0;  // |V|
};

/// Per-pixel photometric penalty lambda*|a-b| + (1-lambda)/2*(1-ssim).
inline double photometric_penalty(double lambda, double target, double warped, double ssim) {
  return lambda * std::abs(target - warped) + 0.5 * (1.0 - lambda) * (1.0 - ssim);
}

/// Mean over V and M_a of the M_sd-weighted photometric penalty. SSIM windows
/// only cover pixels in V. Returns 0 when no pixel qualifies.
inline double photometric_loss(const ImageGray& target, const WarpResult& warped, const MaskStack& masks,
                               const LossWeights& w) {
  require_same_shape(target, warped.synthesized, "photometric_loss");
  require_same_shape(target, masks.validity, "photometric_loss(validity)");
  require_same_shape(target, masks.auto_mask, "photometric_loss(auto_mask)");
  require_same_shape(target, masks.dynamic_mask, "photometric_loss(dynamic_mask)");
  const int width = target.width(), height = target.height();
  std::vector<double> row_sum(height, 0.0);
  std::vector<std::size_t> row_count(height, 0);
  parallel_for(height, [&](int y) {
    for (int x = 0; x < width; ++x) {
      if (!masks.validity(x, y) || !masks.auto_mask(x, y)) continue;
      const double s = ssim_window(target, warped.synthesized, &masks.validity, x, y).value;
      row_sum[y] += masks.dynamic_mask(x, y) *
                    photometric_penalty(w.lambda_pm, target(x, y), warped.synthesized(x, y), s);
      ++row_count[y];
    }
  });
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < height; ++y) {
    sum += row_sum[y];
    n += row_count[y];
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

/// |a - b| / (a + b) for positive depths.
inline double depth_inconsistency(double projected, double sampled) {
  return std::abs(projected - sampled) / (projected + sampled);
}

struct GeometricConsistency {
  double l_gc = 0.0;
  Raster<double> d_diff;  // 0 outside V
  Raster<double> m_sd;    // 1 - d_diff
};

inline GeometricConsistency geometric_consistency(const WarpResult& warped) {
  const int width = warped.validity.width(), height = warped.validity.height();
  GeometricConsistency out;
  out.d_diff = Raster<double>(width, height, 0.0);
  out.m_sd = Raster<double>(width, height, 1.0);
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (!warped.validity(x, y)) continue;
      const double d = depth_inconsistency(warped.projected_depth.depth(x, y), warped.sampled_depth.depth(x, y));
      out.d_diff(x, y) = d;
      out.m_sd(x, y) = 1.0 - d;
      sum += d;
      ++n;
    }
  }
  out.l_gc = n ? sum / static_cast<double>(n) : 0.0;
  return out;
}

namespace detail {

inline double valid_depth_mean(const DepthMap& depth, std::size_t& count) {
  double sum = 0.0;
  count = 0;
  for (std::size_t i = 0; i < depth.depth.size(); ++i) {
    if (depth.valid[i]) {
      sum += depth.depth[i];
      ++count;
    }
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

// Visits every horizontally (axis 0) and vertically (axis 1) adjacent pair of
// valid depths as f(axis, x0, y0, x1, y1).
template <class F>
void for_each_depth_pair(const DepthMap& depth, F&& f) {
  const int w = depth.width(), h = depth.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!depth.is_valid(x, y)) continue;
      if (x + 1 < w && depth.is_valid(x + 1, y)) f(0, x, y, x + 1, y);
      if (y + 1 < h && depth.is_valid(x, y + 1)) f(1, x, y, x, y + 1);
    }
  }
}

}  // namespace detail

/// Edge-aware smoothness on mean-normalized depth n = D / mean(D):
///   mean_x (e^{-|dI/dx|} dn/dx)^2 + mean_y (e^{-|dI/dy|} dn/dy)^2
/// where each mean runs over the adjacent pairs of valid depths along that
/// axis. Forward differences; an axis without pairs contributes 0.
inline double smoothness_loss(const DepthMap& depth, const ImageGray& image) {
  require_same_shape(depth, image, "smoothness_loss");
  std::size_t dn = 0;
  const double mean = detail::valid_depth_mean(depth, dn);
  if (dn == 0) return 0.0;
  double sum[2] = {0.0, 0.0};
  std::size_t n[2] = {0, 0};
  detail::for_each_depth_pair(depth, [&](int axis, int x0, int y0, int x1, int y1) {
    const double e = std::exp(-std::abs(image(x1, y1) - image(x0, y0)));
    const double g = e * (depth.depth(x1, y1) - depth.depth(x0, y0)) / mean;
    sum[axis] += g * g;
    ++n[axis];
  });
  double out = 0.0;
  for (int a = 0; a < 2; ++a) {
    if (n[a]) out += sum[a] / static_cast<double>(n[a]);
  }
  return out;
}

/// Gradient of smoothness_loss with respect to every depth value (0 at
/// invalid pixels).
inline Raster<double> smoothness_gradient(const DepthMap& depth, const ImageGray& image) {
  require_same_shape(depth, image, "smoothness_gradient");
  const int w = depth.width(), h = depth.height();
  Raster<double> grad(w, h, 0.0);
  std::size_t dn = 0;
  const double mean = detail::valid_depth_mean(depth, dn);
  if (dn == 0) return grad;
  std::size_t n[2] = {0, 0};
  detail::for_each_depth_pair(depth, [&](int axis, int, int, int, int) { ++n[axis]; });
  // g = dL/dn first, then chain through n = D / mean(D).
  Raster<double> g(w, h, 0.0);
  detail::for_each_depth_pair(depth, [&](int axis, int x0, int y0, int x1, int y1) {
    const double e = std::exp(-std::abs(image(x1, y1) - image(x0, y0)));
    const double d = (depth.depth(x1, y1) - depth.depth(x0, y0)) / mean;
    const double c = 2.0 * e * e * d / static_cast<double>(n[axis]);
    g(x1, y1) += c;
    g(x0, y0) -= c;
  });
  double gn = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (depth.valid[i]) gn += g[i] * depth.depth[i] / mean;
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (depth.valid[i]) grad[i] = (g[i] - gn / static_cast<double>(dn)) / mean;
  }
  return grad;
}

/// 1 where the warped residual is strictly below the unwarped one.
inline Mask auto_mask(const ImageGray& target, const ImageGray& source, const WarpResult& warped) {
  require_same_shape(target, source, "auto_mask");
  require_same_shape(target, warped.synthesized, "auto_mask(warped)");
  Mask m(target.width(), target.height(), 0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = std::abs(target[i] - warped.synthesized[i]) < std::abs(target[i] - source[i]) ? 1 : 0;
  }
  return m;
}

}  // namespace tslam
