#pragma once

#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tslam/core/error.hpp"
#include "tslam/core/random.hpp"
#include "tslam/geometry/se3.hpp"
#include "tslam/synth/scene.hpp"

namespace tslam {

enum class TrajectoryShape { Straight, SquareLoop, Circle };

inline const char* to_string(TrajectoryShape s) {
  switch (s) {
    case TrajectoryShape::Straight: return "straight";
    case TrajectoryShape::SquareLoop: return "square";
    case TrajectoryShape::Circle: return "circle";
  }
  return "?";
}

inline TrajectoryShape parse_trajectory_shape(const std::string& s) {
  if (s == "straight") return TrajectoryShape::Straight;
  if (s == "square" || s == "square-loop") return TrajectoryShape::SquareLoop;
  if (s == "circle") return TrajectoryShape::Circle;
  throw InvalidArgument("unknown trajectory shape '" + s + "'");
}

struct TrajectorySpec {
  TrajectoryShape shape = TrajectoryShape::Straight;
  double step_length = 0.05;  // meters
  int steps = 40;             // frames = steps + 1
  double sigma_rot_deg = 0.0;     // odometry noise per axis
  double sigma_trans_frac = 0.0;  // odometry noise per axis, fraction of step_length
  /// Yaw the camera to face the direction of travel. Off keeps a constant
  /// heading, which keeps consecutive views overlapping around corners.
  bool follow_heading = false;
  std::uint64_t seed = 1;

  void validate() const {
    if (steps < 1) throw InvalidArgument("trajectory: steps must be >= 1");
    if (!(step_length > 0.0)) throw InvalidArgument("trajectory: step_length must be positive");
    if (sigma_rot_deg < 0.0 || sigma_trans_frac < 0.0) throw InvalidArgument("trajectory: noise must be >= 0");
    if (shape == TrajectoryShape::SquareLoop && steps % 4 != 0) {
      throw InvalidArgument("trajectory: square loop needs a multiple of 4 steps");
    }
  }
};

inline Eigen::Matrix3d yaw_rotation(double angle) {
  return Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitY()).toRotationMatrix();
}

/// World-from-camera poses for every frame (steps + 1 of them). Closed shapes
/// return exactly to the first pose at the last frame.
inline std::vector<PoseSE3> generate_true_poses(const TrajectorySpec& spec) {
  spec.validate();
  std::vector<PoseSE3> poses;
  poses.reserve(spec.steps + 1);
  const double step = spec.step_length;
  switch (spec.shape) {
    case TrajectoryShape::Straight:
      for (int k = 0; k <= spec.steps; ++k) {
        poses.push_back(PoseSE3::translation_only({k * step, 0.0, 0.0}));
      }
      break;
    case TrajectoryShape::SquareLoop: {
      const int n = spec.steps / 4;
      const double side = n * step;
      // Travel forward (+z), right (+x), back (-z), left (-x).
      const Eigen::Vector3d corners[4] = {{0.0, 0.0, 0.0}, {0.0, 0.0, side}, {side, 0.0, side}, {side, 0.0, 0.0}};
      const Eigen::Vector3d dirs[4] = {{0.0, 0.0, 1.0}, {1.0, 0.0, 0.0}, {0.0, 0.0, -1.0}, {-1.0, 0.0, 0.0}};
      for (int k = 0; k < spec.steps; ++k) {
        const int s = k / n, j = k % n;
        const Eigen::Matrix3d r = spec.follow_heading ? yaw_rotation(s * 0.5 * std::numbers::pi)
                                                      : Eigen::Matrix3d::Identity();
        poses.emplace_back(r, corners[s] + (j * step) * dirs[s]);
      }
      poses.push_back(PoseSE3::identity());
      break;
    }
    case TrajectoryShape::Circle: {
      const double radius = spec.steps * step / (2.0 * std::numbers::pi);
      for (int k = 0; k < spec.steps; ++k) {
        const double phi = 2.0 * std::numbers::pi * k / spec.steps;
        const Eigen::Matrix3d r = spec.follow_heading ? yaw_rotation(phi) : Eigen::Matrix3d::Identity();
        poses.emplace_back(r, Eigen::Vector3d(radius * (1.0 - std::cos(phi)), 0.0, radius * std::sin(phi)));
      }
      poses.push_back(PoseSE3::identity());
      break;
    }
  }
  return poses;
}

/// Relative poses P_k^-1 P_{k+1}.
inline std::vector<PoseSE3> relative_poses(const std::vector<PoseSE3>& poses) {
  std::vector<PoseSE3> rel;
  for (std::size_t k = 0; k + 1 < poses.size(); ++k) rel.push_back(poses[k].inverse() * poses[k + 1]);
  return rel;
}

/// Perturbs each relative pose on the right by exp(xi), xi ~ N(0, sigma) per
/// axis. Zero noise returns the input unchanged.
inline std::vector<PoseSE3> perturb_odometry(const std::vector<PoseSE3>& rel, double sigma_rot_rad,
                                             double sigma_trans, std::uint64_t seed) {
  if (sigma_rot_rad == 0.0 && sigma_trans == 0.0) return rel;
  Rng rng(seed);
  std::vector<PoseSE3> out;
  out.reserve(rel.size());
  for (const auto& r : rel) {
    Twist xi;
    for (int i = 0; i < 3; ++i) xi(i) = rng.normal(0.0, sigma_rot_rad);
    for (int i = 3; i < 6; ++i) xi(i) = rng.normal(0.0, sigma_trans);
    out.push_back(r * se3_exp(xi));
  }
  return out;
}

/// Chains relative poses from the identity.
inline std::vector<PoseSE3> chain_poses(const std::vector<PoseSE3>& rel, const PoseSE3& start = {}) {
  std::vector<PoseSE3> poses{start};
  for (const auto& r : rel) poses.push_back(poses.back() * r);
  return poses;
}

struct SyntheticSequence {
  std::vector<ImageGray> images;
  std::vector<DepthMap> depths;
  std::vector<PoseSE3> true_poses;     // world_from_camera
  std::vector<PoseSE3> true_relative;  // P_k^-1 P_{k+1}
  std::vector<PoseSE3> noisy_odometry;
};

/// Renders every frame of the trajectory (unless render is false) and builds
/// the seeded noisy odometry.
inline SyntheticSequence generate_sequence(const SceneSpec& scene, const TrajectorySpec& traj, const Intrinsics& k,
                                           bool render = true) {
  SyntheticSequence seq;
  seq.true_poses = generate_true_poses(traj);
  seq.true_relative = relative_poses(seq.true_poses);
  seq.noisy_odometry = perturb_odometry(seq.true_relative, deg2rad(traj.sigma_rot_deg),
                                        traj.sigma_trans_frac * traj.step_length, traj.seed);
  if (render) {
    const SyntheticScene s(scene);
    for (const auto& p : seq.true_poses) {
      auto [img, depth] = s.render(k, p);
      seq.images.push_back(std::move(img));
      seq.depths.push_back(std::move(depth));
    }
  }
  return seq;
}

}  // namespace tslam
