#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <tuple>

#include "tslam/tslam.hpp"

namespace tslam::testing {

/// Two rendered views of the same scene plus the true T_{t->s}.
struct RenderedPair {
  ImageGray target, source;
  DepthMap target_depth, source_depth;
  PoseSE3 t_to_s;
};

inline RenderedPair render_pair(const SceneSpec& scene, const Intrinsics& k, const PoseSE3& world_target,
                                const PoseSE3& world_source) {
  const SyntheticScene s(scene);
  RenderedPair p;
  std::tie(p.target, p.target_depth) = s.render(k, world_target);
  std::tie(p.source, p.source_depth) = s.render(k, world_source);
  p.t_to_s = world_source.inverse() * world_target;
  return p;
}

inline ImageGray random_image(int w, int h, Rng& rng) {
  ImageGray img(w, h);
  for (auto& v : img) v = rng.uniform();
  return img;
}

inline DepthMap random_depth(int w, int h, Rng& rng, double lo = 2.0, double hi = 6.0) {
  Raster<double> d(w, h);
  for (auto& v : d) v = rng.uniform(lo, hi);
  return DepthMap::from_depths(std::move(d));
}

inline Twist random_twist(Rng& rng, double rot_sigma, double trans_sigma) {
  Twist xi;
  for (int i = 0; i < 3; ++i) xi(i) = rng.normal(0.0, rot_sigma);
  for (int i = 3; i < 6; ++i) xi(i) = rng.normal(0.0, trans_sigma);
  return xi;
}

/// Mean |a - b| over pixels where mask is set; -1 when the mask is empty.
inline double masked_mean_abs(const ImageGray& a, const ImageGray& b, const Mask& mask) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!mask[i]) continue;
    sum += std::abs(a[i] - b[i]);
    ++n;
  }
  return n ? sum / static_cast<double>(n) : -1.0;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("tslam_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace tslam::testing
