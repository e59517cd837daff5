#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tslam/core/error.hpp"

namespace tslam {

/// Dense row-major 2-D array. Pixel (x, y) sits at continuous coordinate
/// (x, y); there is no half-pixel offset anywhere in the library.
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) {
      throw ShapeError("raster dimensions must be non-negative");
    }
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }
  Raster(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 0 || height < 0 ||
        data_.size() != static_cast<std::size_t>(width) * height) {
      throw ShapeError("raster data length does not match width*height");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int x, int y) {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  const T& operator()(int x, int y) const {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  template <typename U>
  bool same_shape(const Raster<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool operator==(const Raster& other) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Single-channel intensity image with values in [0, 1].
using ImageGray = Raster<double>;
/// Boolean per-pixel mask (0 / 1).
using Mask = Raster<std::uint8_t>;

/// Per-pixel depth in meters plus a validity flag per pixel.
struct DepthMap {
  Raster<double> depth;
  Mask valid;

  DepthMap() = default;
  DepthMap(int width, int height)
      : depth(width, height, 0.0), valid(width, height, 0) {}

  /// Fully valid map from a raster of positive depths.
  static DepthMap from_depths(Raster<double> d) {
    DepthMap m;
    m.valid = Mask(d.width(), d.height(), 1);
    m.depth = std::move(d);
    for (std::size_t i = 0; i < m.depth.size(); ++i) {
      if (!(m.depth[i] > 0.0) || !std::isfinite(m.depth[i])) m.valid[i] = 0;
    }
    return m;
  }

  int width() const noexcept { return depth.width(); }
  int height() const noexcept { return depth.height(); }
  bool is_valid(int x, int y) const { return valid(x, y) != 0; }

  void set(int x, int y, double d) {
    depth(x, y) = d;
    valid(x, y) = (d > 0.0 && std::isfinite(d)) ? 1 : 0;
  }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto v : valid.data()) n += v ? 1 : 0;
    return n;
  }

  bool operator==(const DepthMap& other) const = default;
};

template <typename A, typename B>
inline void require_same_shape(const A& a, const B& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw ShapeError(std::string(what) + ": raster dimensions differ (" +
                     std::to_string(a.width()) + "x" +
                     std::to_string(a.height()) + " vs " +
                     std::to_string(b.width()) + "x" +
                     std::to_string(b.height()) + ")");
  }
}

/// Checks the ImageGray invariant: every value finite and in [0, 1].
inline bool is_unit_image(const ImageGray& img) {
  for (double v : img.data()) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) return false;
  }
  return true;
}

inline std::size_t count_true(const Mask& m) {
  std::size_t n = 0;
  for (auto v : m.data()) n += v ? 1 : 0;
  return n;
}

}  // namespace tslam
