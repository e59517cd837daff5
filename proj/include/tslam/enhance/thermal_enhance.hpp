#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tslam/core/error.hpp"
#include "tslam/core/parallel.hpp"
#include "tslam/core/raster.hpp"

namespace tslam {

/// Raw 16-bit sensor counts.
using RawThermal = Raster<std::uint16_t>;

struct EnhanceParams {
  double clip_lo = 1.0;   // percentile
  double clip_hi = 99.0;  // percentile
  double sigma = 3.0;     // Gaussian std-dev of the background layer, pixels
  double detail_gain = 1.5;
  double out_lo = 0.0;
  double out_hi = 1.0;

  void validate() const {
    if (!(clip_lo >= 0.0 && clip_hi <= 100.0 && clip_lo < clip_hi)) {
      throw InvalidArgument("enhance: need 0 <= clip_lo < clip_hi <= 100");
    }
    if (!(sigma > 0.0)) throw InvalidArgument("enhance: sigma must be positive");
    if (!(detail_gain >= 0.0)) throw InvalidArgument("enhance: detail_gain must be non-negative");
    if (!(out_lo >= 0.0 && out_lo < out_hi && out_hi <= 1.0)) {
      throw InvalidArgument("enhance: need 0 <= out_lo < out_hi <= 1");
    }
  }
};

namespace detail {

/// Linear-interpolated percentile of 16-bit counts via a full histogram.
class CountPercentiles {
 public:
  explicit CountPercentiles(const RawThermal& raw) : n_(raw.size()) {
    std::vector<std::uint32_t> hist(65536, 0);
    for (auto c : raw.data()) ++hist[c];
    cumulative_.resize(65536);
    std::uint64_t acc = 0;
    for (std::size_t i = 0; i < hist.size(); ++i) {
      acc += hist[i];
      cumulative_[i] = acc;
    }
  }

  double operator()(double q) const {
    if (n_ == 0) return 0.0;
    const double pos = q / 100.0 * static_cast<double>(n_ - 1);
    const auto lo = static_cast<std::uint64_t>(std::floor(pos));
    const std::uint64_t hi = std::min<std::uint64_t>(lo + 1, n_ - 1);
    const double frac = pos - static_cast<double>(lo);
    const double a = rank_value(lo), b = rank_value(hi);
    return a + frac * (b - a);
  }

 private:
  // Value at 0-based rank r of the sorted data.
  double rank_value(std::uint64_t r) const {
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
    return static_cast<double>(it - cumulative_.begin());
  }

  std::size_t n_;
  std::vector<std::uint64_t> cumulative_;
};

inline std::vector<double> gaussian_taps(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k) {
    taps[k + radius] = std::exp(-0.5 * (k * k) / (sigma * sigma));
  }
  return taps;
}

}  // namespace detail

/// Percentile clip then affine map [p_lo, p_hi] -> [out_lo, out_hi].
/// A degenerate range maps everything to the midpoint of the output bounds.
inline ImageGray linear_stretch(const RawThermal& raw, const EnhanceParams& params) {
  params.validate();
  ImageGray out(raw.width(), raw.height(), 0.0);
  if (raw.empty()) return out;
  const detail::CountPercentiles pct(raw);
  const double p_lo = pct(params.clip_lo);
  const double p_hi = pct(params.clip_hi);
  if (!(p_hi > p_lo)) {
    std::fill(out.data().begin(), out.data().end(), 0.5 * (params.out_lo + params.out_hi));
    return out;
  }
  const double scale = (params.out_hi - params.out_lo) / (p_hi - p_lo);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = params.out_lo + (static_cast<double>(raw[i]) - p_lo) * scale;
    out[i] = std::clamp(v, params.out_lo, params.out_hi);
  }
  return out;
}

/// Separable Gaussian blur truncated at ceil(3 sigma); near the border only
/// in-bounds taps are used and their weights renormalized to sum 1.
inline Raster<double> gaussian_blur(const Raster<double>& img, double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("gaussian_blur: sigma must be positive");
  const std::vector<double> taps = detail::gaussian_taps(sigma);
  const int radius = static_cast<int>(taps.size() / 2);
  const int w = img.width(), h = img.height();

  Raster<double> tmp(w, h, 0.0), out(w, h, 0.0);
  parallel_for(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0, norm = 0.0;
      const int k0 = std::max(-radius, -x), k1 = std::min(radius, w - 1 - x);
      for (int k = k0; k <= k1; ++k) {
        acc += taps[k + radius] * img(x + k, y);
        norm += taps[k + radius];
      }
      tmp(x, y) = acc / norm;
    }
  });
  parallel_for(h, [&](int y) {
    const int k0 = std::max(-radius, -y), k1 = std::min(radius, h - 1 - y);
    double norm = 0.0;
    for (int k = k0; k <= k1; ++k) norm += taps[k + radius];
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = k0; k <= k1; ++k) acc += taps[k + radius] * tmp(x, y + k);
      out(x, y) = acc / norm;
    }
  });
  return out;
}

struct Decomposition {
  Raster<double> background;
  Raster<double> detail;  // signed; background + detail == input
};

inline Decomposition decompose(const Raster<double>& img, double sigma) {
  Decomposition d;
  d.background = gaussian_blur(img, sigma);
  d.detail = Raster<double>(img.width(), img.height(), 0.0);
  for (std::size_t i = 0; i < img.size(); ++i) d.detail[i] = img[i] - d.background[i];
  return d;
}

/// Stretch, split into background/detail layers, boost the detail layer and
/// recombine, clamped to [0, 1].
inline ImageGray enhance(const RawThermal& raw, const EnhanceParams& params) {
  const ImageGray stretched = linear_stretch(raw, params);
  const Decomposition d = decompose(stretched, params.sigma);
  ImageGray out(raw.width(), raw.height(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = d.background[i] + params.detail_gain * d.detail[i];
    out[i] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

}  // namespace tslam
