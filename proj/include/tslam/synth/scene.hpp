#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <variant>

#include <Eigen/Core>

#include "tslam/core/error.hpp"
#include "tslam/core/parallel.hpp"
#include "tslam/core/random.hpp"
#include "tslam/core/raster.hpp"
#include "tslam/geometry/camera.hpp"
#include "tslam/geometry/se3.hpp"

namespace tslam {

/// Band-limited procedural texture: octaves of seeded value noise, interpolated
/// with a quintic fade so the field is C2 smooth.
struct TextureSpec {
  double cell_size = 1.5;  // meters per lattice cell of the lowest octave
  int octaves = 4;
  double persistence = 0.5;
  double contrast = 1.5;  // intensity = clamp(0.5 + contrast * (noise - 0.5))
};

/// Plane n . X = distance in world coordinates.
struct PlaneModel {
  Eigen::Vector3d normal{0.0, 0.0, 1.0};
  double distance = 5.0;
};

/// Smooth random wall surrounding the world y axis: the surface point at
/// azimuth theta = atan2(x, z) and height y lies at horizontal radius
/// min_depth + (max_depth - min_depth) * noise(theta, y). Cameras near the
/// axis see it in every heading, which closed loops need.
struct HeightfieldModel {
  double min_depth = 4.0;
  double max_depth = 12.0;
  int azimuth_cells = 6;       // lattice cells around the full circle
  double vertical_cell = 4.0;  // meters
  int octaves = 2;
};

struct SceneSpec {
  TextureSpec texture;
  std::variant<PlaneModel, HeightfieldModel> depth_model = HeightfieldModel{};
  std::uint64_t seed = 1;

  void validate() const {
    if (!(texture.cell_size > 0.0) || texture.octaves < 1) throw InvalidArgument("scene: invalid texture");
    if (const auto* hf = std::get_if<HeightfieldModel>(&depth_model)) {
      if (!(hf->min_depth > 0.0 && hf->max_depth >= hf->min_depth)) {
        throw InvalidArgument("scene: heightfield depth range must be positive");
      }
      if (hf->azimuth_cells < 1 || !(hf->vertical_cell > 0.0) || hf->octaves < 1) {
        throw InvalidArgument("scene: invalid heightfield lattice");
      }
    } else {
      const auto& pl = std::get<PlaneModel>(depth_model);
      if (!(pl.normal.norm() > 0.0)) throw InvalidArgument("scene: plane normal must be non-zero");
    }
  }
};

namespace detail {

inline double lattice_value(std::int64_t ix, std::int64_t iy, std::uint64_t salt) {
  std::uint64_t h = mix64(salt);
  h = mix64(h ^ static_cast<std::uint64_t>(ix));
  h = mix64(h ^ static_cast<std::uint64_t>(iy));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

/// Value noise in [0, 1). period_x > 0 wraps the lattice horizontally.
inline double value_noise(double sx, double sy, std::int64_t period_x, std::uint64_t salt) {
  const double fx = std::floor(sx), fy = std::floor(sy);
  std::int64_t x0 = static_cast<std::int64_t>(fx), y0 = static_cast<std::int64_t>(fy);
  const double tx = fade(sx - fx), ty = fade(sy - fy);
  std::int64_t x1 = x0 + 1;
  if (period_x > 0) {
    x0 = ((x0 % period_x) + period_x) % period_x;
    x1 = ((x1 % period_x) + period_x) % period_x;
  }
  const double v00 = lattice_value(x0, y0, salt), v10 = lattice_value(x1, y0, salt);
  const double v01 = lattice_value(x0, y0 + 1, salt), v11 = lattice_value(x1, y0 + 1, salt);
  const double top = v00 + tx * (v10 - v00);
  const double bot = v01 + tx * (v11 - v01);
  return top + ty * (bot - top);
}

/// Normalized octave sum in [0, 1).
inline double fractal_noise(double sx, double sy, std::int64_t period_x, int octaves, double persistence,
                            std::uint64_t salt) {
  double sum = 0.0, norm = 0.0, amp = 1.0, freq = 1.0;
  for (int o = 0; o < octaves; ++o) {
    sum += amp * value_noise(sx * freq, sy * freq, period_x > 0 ? period_x << o : 0, salt + 977 * o);
    norm += amp;
    amp *= persistence;
    freq *= 2.0;
  }
  return sum / norm;
}

inline double wrap_angle_unit(double x, double z) {
  // Azimuth in [0, 1) turns.
  double a = std::atan2(x, z) / (2.0 * std::numbers::pi);
  if (a < 0.0) a += 1.0;
  return a;
}

}  // namespace detail

/// Scene geometry and texture evaluation.
class SyntheticScene {
 public:
  explicit SyntheticScene(SceneSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    if (const auto* pl = std::get_if<PlaneModel>(&spec_.depth_model)) {
      plane_normal_ = pl->normal.normalized();
      const Eigen::Vector3d helper = std::abs(plane_normal_.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
      plane_u_ = plane_normal_.cross(helper).normalized();
      plane_v_ = plane_normal_.cross(plane_u_);
    }
  }

  const SceneSpec& spec() const { return spec_; }

  /// Horizontal radius of the surround wall at (azimuth turns, height).
  double wall_radius(double turns, double y) const {
    const auto& hf = std::get<HeightfieldModel>(spec_.depth_model);
    const double n = detail::fractal_noise(turns * hf.azimuth_cells, y / hf.vertical_cell, hf.azimuth_cells,
                                           hf.octaves, 0.5, spec_.seed ^ 0x48f1e1dULL);
    return hf.min_depth + (hf.max_depth - hf.min_depth) * n;
  }

  /// Texture intensity at a world point on the surface.
  double intensity(const Eigen::Vector3d& p) const {
    const TextureSpec& t = spec_.texture;
    double n;
    if (std::holds_alternative<HeightfieldModel>(spec_.depth_model)) {
      const auto& hf = std::get<HeightfieldModel>(spec_.depth_model);
      const double ref_radius = 0.5 * (hf.min_depth + hf.max_depth);
      const auto period = std::max<std::int64_t>(
          1, std::llround(2.0 * std::numbers::pi * ref_radius / t.cell_size));
      const double turns = detail::wrap_angle_unit(p.x(), p.z());
      n = detail::fractal_noise(turns * static_cast<double>(period), p.y() / t.cell_size, period, t.octaves,
                                t.persistence, spec_.seed ^ 0x7e47ULL);
    } else {
      n = detail::fractal_noise(p.dot(plane_u_) / t.cell_size, p.dot(plane_v_) / t.cell_size, 0, t.octaves,
                                t.persistence, spec_.seed ^ 0x7e47ULL);
    }
    return std::clamp(0.5 + t.contrast * (n - 0.5), 0.0, 1.0);
  }

  /// Ray parameter s of the first surface hit along origin + s * dir, or a
  /// negative value when there is none.
  double intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) const {
    if (const auto* pl = std::get_if<PlaneModel>(&spec_.depth_model)) {
      const double denom = plane_normal_.dot(dir);
      if (std::abs(denom) < 1e-15) return -1.0;
      const double s = (pl->distance / pl->normal.norm() - plane_normal_.dot(origin)) / denom;
      return (s > kMinValidDepth && std::isfinite(s)) ? s : -1.0;
    }
    const auto& hf = std::get<HeightfieldModel>(spec_.depth_model);
    auto f = [&](double s) {
      const Eigen::Vector3d p = origin + s * dir;
      return std::hypot(p.x(), p.z()) - wall_radius(detail::wrap_angle_unit(p.x(), p.z()), p.y());
    };
    const double o_r = std::hypot(origin.x(), origin.z());
    const double d_r = std::hypot(dir.x(), dir.z());
    if (d_r < 1e-9) return -1.0;
    double lo = 0.0;
    if (o_r < hf.min_depth) lo = 0.999 * (hf.min_depth - o_r) / d_r;
    double f_lo = f(lo);
    if (f_lo >= 0.0) return -1.0;
    const double step = 0.25 / d_r;
    const double s_max = lo + 4.0 * (hf.max_depth + o_r) / d_r;
    double hi = lo + step, f_hi = f(hi);
    while (f_hi < 0.0) {
      lo = hi;
      f_lo = f_hi;
      hi += step;
      if (hi > s_max) return -1.0;
      f_hi = f(hi);
    }
    // Illinois regula falsi on the bracket.
    int side = 0;
    for (int it = 0; it < 200; ++it) {
      const double s = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
      const double fs = f(s);
      if (fs == 0.0 || (hi - lo) < 1e-14 * hi) return s;
      if ((fs < 0.0) == (f_lo < 0.0)) {
        lo = s;
        f_lo = fs;
        if (side == -1) f_hi *= 0.5;
        side = -1;
      } else {
        hi = s;
        f_hi = fs;
        if (side == 1) f_lo *= 0.5;
        side = 1;
      }
      if (std::abs(fs) < 1e-14) return s;
    }
    return 0.5 * (lo + hi);
  }

  /// Renders intensity and depth from a camera with world_from_camera pose.
  /// Rays are K^-1 (u, v, 1), so the ray parameter equals camera-frame depth.
  std::pair<ImageGray, DepthMap> render(const Intrinsics& k, const PoseSE3& world_from_camera) const {
    k.validate();
    ImageGray img(k.width, k.height, 0.0);
    DepthMap depth(k.width, k.height);
    const Eigen::Matrix3d& r = world_from_camera.rotation();
    const Eigen::Vector3d& o = world_from_camera.translation();
    parallel_for(k.height, [&](int y) {
      for (int x = 0; x < k.width; ++x) {
        const Eigen::Vector3d dir = r * k.unproject({double(x), double(y)});
        const double s = intersect(o, dir);
        if (!(s > 0.0)) continue;
        depth.set(x, y, s);
        img(x, y) = intensity(o + s * dir);
      }
    });
    return {std::move(img), std::move(depth)};
  }

 private:
  SceneSpec spec_;
  Eigen::Vector3d plane_normal_ = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d plane_u_ = Eigen::Vector3d::UnitX();
  Eigen::Vector3d plane_v_ = Eigen::Vector3d::UnitY();
};

inline std::pair<ImageGray, DepthMap> render_view(const SceneSpec& scene, const Intrinsics& k,
                                                  const PoseSE3& world_from_camera) {
  return SyntheticScene(scene).render(k, world_from_camera);
}

}  // namespace tslam
