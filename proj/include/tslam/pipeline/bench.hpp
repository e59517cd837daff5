#pragma once

#include <algorithm>
#include <chrono>
#include <ostream>

#include "tslam/enhance/thermal_enhance.hpp"
#include "tslam/geometry/warp.hpp"
#include "tslam/io/config.hpp"
#include "tslam/io/pgm.hpp"
#include "tslam/odometry/direct_odometry.hpp"
#include "tslam/synth/scene.hpp"

namespace tslam {

struct BenchOptions {
  int width = 640;
  int height = 480;
  int repetitions = 10;           // enhancement and warp
  int odometry_repetitions = 1;
  std::uint64_t seed = 1;
};

struct BenchReport {
  double enhance_fps = 0.0;
  double warp_fps = 0.0;
  double enhance_warp_fps = 0.0;  // one enhancement plus one warp per frame
  double odometry_fps = 0.0;
  int width = 0, height = 0;
};

/// Throughput on a rendered synthetic pair. Numbers depend on the machine and
/// the configured thread count.
inline BenchReport run_bench(const BenchOptions& opt) {
  if (opt.repetitions < 1 || opt.odometry_repetitions < 0) throw InvalidArgument("bench: repetitions must be >= 1");
  const Intrinsics k = Intrinsics::centered(opt.width, opt.height);
  SceneSpec spec;
  spec.seed = opt.seed;
  const SyntheticScene scene(spec);
  const PoseSE3 a;
  const PoseSE3 b = se3_exp(make_twist({0.0, 0.01, 0.0}, {0.05, 0.0, 0.03}));
  const auto [img_a, depth_a] = scene.render(k, a);
  const auto [img_b, depth_b] = scene.render(k, b);
  const RawThermal raw = quantize_image(img_a);
  const EnhanceParams params;
  const PoseSE3 t_to_s = b.inverse() * a;

  using clock = std::chrono::steady_clock;
  auto seconds = [](clock::time_point t0) { return std::chrono::duration<double>(clock::now() - t0).count(); };
  double sink = 0.0;

  auto t0 = clock::now();
  for (int i = 0; i < opt.repetitions; ++i) sink += enhance(raw, params)(0, 0);
  const double t_enh = seconds(t0) / opt.repetitions;

  t0 = clock::now();
  for (int i = 0; i < opt.repetitions; ++i) sink += inverse_warp(img_b, depth_a, t_to_s, k, depth_b).synthesized(0, 0);
  const double t_warp = seconds(t0) / opt.repetitions;

  BenchReport rep;
  rep.width = opt.width;
  rep.height = opt.height;
  rep.enhance_fps = 1.0 / t_enh;
  rep.warp_fps = 1.0 / t_warp;
  rep.enhance_warp_fps = 1.0 / (t_enh + t_warp);
  if (opt.odometry_repetitions > 0) {
    t0 = clock::now();
    for (int i = 0; i < opt.odometry_repetitions; ++i) {
      sink += estimate_relative_pose(img_a, img_b, depth_a, depth_b, k, OdometryParams{}).final_loss;
    }
    rep.odometry_fps = opt.odometry_repetitions / seconds(t0);
  }
  if (sink == -1.0) rep.width = -1;  // keeps the timed work observable
  return rep;
}

inline void write_bench_report(std::ostream& os, const BenchReport& r) {
  os << "resolution = " << r.width << "x" << r.height << '\n';
  os << "enhance_fps = " << format_double(r.enhance_fps) << '\n';
  os << "warp_fps = " << format_double(r.warp_fps) << '\n';
  os << "enhance_warp_fps = " << format_double(r.enhance_warp_fps) << '\n';
  os << "odometry_fps = " << format_double(r.odometry_fps) << '\n';
}

}  // namespace tslam
