#pragma once

#include "tslam/core/parallel.hpp"
#include "tslam/core/raster.hpp"

namespace tslam {

inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Statistics and SSIM value of one 3x3 window, plus the partial derivatives
/// of the SSIM value with respect to the b-side statistics.
struct SsimWindow {
  int n = 0;
  double mu_a = 0.0, mu_b = 0.0;
  double var_a = 0.0, var_b = 0.0, cov = 0.0;
  double value = 0.0;
  double d_mu_b = 0.0;   // dS/d(mu_b) holding the second moments fixed
  double d_var_b = 0.0;  // dS/d(var_b)
  double d_cov = 0.0;    // dS/d(cov)
};

/// SSIM over the 3x3 window centered on (x, y), restricted to in-raster pixels
/// with mask != 0 (pass nullptr to use every in-raster pixel). Population
/// (1/n) moments, computed in two passes.
inline SsimWindow ssim_window(const Raster<double>& a, const Raster<double>& b, const Mask* mask,
                              int x, int y) {
  SsimWindow s;
  const int w = a.width(), h = a.height();
  double sa = 0.0, sb = 0.0;
  for (int dy = -1; dy <= 1; ++dy) {
    const int yy = y + dy;
    if (yy < 0 || yy >= h) continue;
    for (int dx = -1; dx <= 1; ++dx) {
      const int xx = x + dx;
      if (xx < 0 || xx >= w) continue;
      if (mask && !(*mask)(xx, yy)) continue;
      sa += a(xx, yy);
      sb += b(xx, yy);
      ++s.n;
    }
  }
  if (s.n == 0) return s;
  s.mu_a = sa / s.n;
  s.mu_b = sb / s.n;
  double vaa = 0.0, vbb = 0.0, vab = 0.0;
  for (int dy = -1; dy <= 1; ++dy) {
    const int yy = y + dy;
    if (yy < 0 || yy >= h) continue;
    for (int dx = -1; dx <= 1; ++dx) {
      const int xx = x + dx;
      if (xx < 0 || xx >= w) continue;
      if (mask && !(*mask)(xx, yy)) continue;
      const double da = a(xx, yy) - s.mu_a, db = b(xx, yy) - s.mu_b;
      vaa += da * da;
      vbb += db * db;
      vab += da * db;
    }
  }
  s.var_a = vaa / s.n;
  s.var_b = vbb / s.n;
  s.cov = vab / s.n;

  const double a1 = 2.0 * s.mu_a * s.mu_b + kSsimC1;
  const double a2 = 2.0 * s.cov + kSsimC2;
  const double b1 = s.mu_a * s.mu_a + s.mu_b * s.mu_b + kSsimC1;
  const double b2 = s.var_a + s.var_b + kSsimC2;
  s.value = (a1 * a2) / (b1 * b2);
  s.d_mu_b = s.value * (2.0 * s.mu_a / a1 - 2.0 * s.mu_b / b1);
  s.d_var_b = -s.value / b2;
  s.d_cov = s.value * 2.0 / a2;
  return s;
}

/// Per-pixel SSIM with a 3x3 uniform window; windows at the border (and
/// around masked-out pixels when a mask is given) are renormalized over the
/// pixels they actually cover. Pixels outside the mask get 0.
inline Raster<double> ssim_map(const Raster<double>& a, const Raster<double>& b,
                               const Mask* mask = nullptr) {
  require_same_shape(a, b, "ssim_map");
  if (mask) require_same_shape(a, *mask, "ssim_map(mask)");
  Raster<double> out(a.width(), a.height(), 0.0);
  parallel_for(a.height(), [&](int y) {
    for (int x = 0; x < a.width(); ++x) {
      if (mask && !(*mask)(x, y)) continue;
      out(x, y) = ssim_window(a, b, mask, x, y).value;
    }
  });
  return out;
}

}  // namespace tslam
