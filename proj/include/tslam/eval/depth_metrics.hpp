#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "tslam/core/error.hpp"
#include "tslam/core/raster.hpp"

namespace tslam {

struct DepthEvalOptions {
  bool median_scale = true;
  double min_depth = 0.5;
  double max_depth = 80.0;

  void validate() const {
    if (!(min_depth >= 0.0) || !(max_depth > min_depth)) {
      throw InvalidArgument("depth metrics: need 0 <= min_depth < max_depth");
    }
  }
};

struct DepthEvalReport {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double a1 = 0.0, a2 = 0.0, a3 = 0.0;
  std::size_t count = 0;
  double scale = 1.0;  // median ratio applied to the prediction
};

/// Median with the two middle values averaged for even counts.
inline double median_of(std::vector<double> v) {
  if (v.empty()) throw EmptyResult("median of empty set");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

/// Pixels count when the ground truth is valid and within
/// [min_depth, max_depth] and the prediction is valid.
inline DepthEvalReport depth_metrics(const DepthMap& pred, const DepthMap& gt, const DepthEvalOptions& opt = {}) {
  opt.validate();
  require_same_shape(pred.depth, gt.depth, "depth_metrics");
  std::vector<double> p, g;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!gt.is_valid(x, y) || !pred.is_valid(x, y)) continue;
      const double gv = gt.depth(x, y);
      if (gv < opt.min_depth || gv > opt.max_depth) continue;
      p.push_back(pred.depth(x, y));
      g.push_back(gv);
    }
  }
  if (g.empty()) throw EmptyResult("depth_metrics: no valid pixels");
  DepthEvalReport r;
  r.count = g.size();
  if (opt.median_scale) {
    r.scale = median_of(g) / median_of(p);
    for (double& v : p) v *= r.scale;
  }
  const double n = static_cast<double>(g.size());
  const double t1 = 1.25, t2 = 1.25 * 1.25, t3 = 1.25 * 1.25 * 1.25;
  double se = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double d = p[i] - g[i];
    r.abs_rel += std::abs(d) / g[i];
    r.sq_rel += d * d / g[i];
    se += d * d;
    const double ratio = std::max(p[i] / g[i], g[i] / p[i]);
    r.a1 += ratio < t1;
    r.a2 += ratio < t2;
    r.a3 += ratio < t3;
  }
  r.abs_rel /= n;
  r.sq_rel /= n;
  r.rmse = std::sqrt(se / n);
  r.a1 /= n;
  r.a2 /= n;
  r.a3 /= n;
  return r;
}

}  // namespace tslam
