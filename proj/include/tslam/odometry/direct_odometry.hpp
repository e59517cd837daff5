#pragma once

#include <cmath>
#include <sstream>
#include <vector>

#include <Eigen/Cholesky>

#include "tslam/core/error.hpp"
#include "tslam/geometry/camera.hpp"
#include "tslam/geometry/se3.hpp"
#include "tslam/objective/objective.hpp"
#include "tslam/odometry/pyramid.hpp"

namespace tslam {

struct OdometryParams {
  int pyramid_levels = 4;
  int max_iterations = 50;  // per level
  double damping_init = 1e-4;
  double damping_up = 10.0;
  double damping_down = 0.1;
  double convergence_tol = 1e-7;  // twist-update norm
  double min_valid_fraction = 0.25;
  /// See ObjectiveOptions::use_auto_mask.
  bool use_auto_mask = false;

  void validate() const {
    if (pyramid_levels < 1) throw InvalidArgument("odometry: pyramid_levels must be >= 1");
    if (max_iterations < 1) throw InvalidArgument("odometry: max_iterations must be >= 1");
    if (!(damping_init > 0.0) || !(damping_up > 1.0) || !(damping_down > 0.0 && damping_down < 1.0)) {
      throw InvalidArgument("odometry: invalid damping schedule");
    }
    if (!(convergence_tol > 0.0)) throw InvalidArgument("odometry: convergence_tol must be positive");
    if (!(min_valid_fraction > 0.0 && min_valid_fraction <= 1.0)) {
      throw InvalidArgument("odometry: min_valid_fraction must be in (0, 1]");
    }
  }
};

struct OdometryResult {
  PoseSE3 pose;  // T_{t->s}
  double final_loss = 0.0;
  int iterations_used = 0;
  bool converged = false;
  double valid_fraction = 0.0;
  double last_step_norm = 0.0;
  /// Objective after each accepted step, one list per pyramid level
  /// (coarsest first; the first entry of each list is the starting value).
  std::vector<std::vector<double>> level_losses;
};

/// Estimates T_{t->s} by Levenberg-Marquardt on the photometric + geometric
/// objective (smoothness is constant in the pose and skipped), coarse to fine.
/// Throws DegenerateOverlap when the finest-level valid fraction is below
/// params.min_valid_fraction.
inline OdometryResult estimate_relative_pose(const ImageGray& target, const ImageGray& source,
                                             const DepthMap& target_depth, const DepthMap& source_depth,
                                             const Intrinsics& k, const OdometryParams& params,
                                             const PoseSE3& init = PoseSE3::identity(),
                                             const LossWeights& weights = {}) {
  params.validate();
  weights.validate();
  ViewPair{target, source, target_depth, source_depth, k}.validate();
  if (!init.is_valid(1e-6)) throw InvalidArgument("odometry: initial rotation is not a valid rotation");

  const int levels = params.pyramid_levels;
  const auto tp = build_pyramid(target, levels);
  const auto sp = build_pyramid(source, levels);
  const auto tdp = build_pyramid(target_depth, levels);
  const auto sdp = build_pyramid(source_depth, levels);
  std::vector<Intrinsics> kp{k};
  for (int i = 1; i < levels; ++i) kp.push_back(kp.back().half_resolution());

  ObjectiveOptions options;
  options.use_auto_mask = params.use_auto_mask;
  options.include_smoothness = false;
  ObjectiveRequest req;
  req.twist_gradient = true;
  req.gauss_newton = true;

  OdometryResult result;
  PoseSE3 pose = init;
  ObjectiveEvaluation current;

  for (int level = levels - 1; level >= 0; --level) {
    const ViewPair views{tp[level], sp[level], tdp[level], sdp[level], kp[level]};
    current = evaluate_objective(views, pose, weights, options, nullptr, req);
    std::vector<double> losses{current.loss.l_total};
    double mu = params.damping_init;
    bool converged = false;

    for (int it = 0; it < params.max_iterations; ++it) {
      Matrix6d a = current.gauss_newton;
      const double trace = a.trace();
      a.diagonal() += mu * current.gauss_newton.diagonal();
      a.diagonal().array() += 1e-12 * (trace > 0.0 ? trace : 1.0);
      const Twist step = -a.ldlt().solve(current.grad_twist);
      result.last_step_norm = step.norm();
      if (!step.allFinite() || step.norm() < params.convergence_tol) {
        converged = step.allFinite();
        break;
      }
      const PoseSE3 candidate = se3_exp(step) * pose;
      ObjectiveEvaluation trial = evaluate_objective(views, candidate, weights, options, nullptr, req);
      ++result.iterations_used;
      // Decreases at round-off level do not count.
      const double required = current.loss.l_total * (1.0 - 1e-12) - 1e-15;
      if (trial.loss.l_total < required) {
        pose = candidate;
        current = std::move(trial);
        losses.push_back(current.loss.l_total);
        mu = std::max(mu * params.damping_down, 1e-12);
      } else {
        mu *= params.damping_up;
        if (mu > 1e12) break;
      }
    }
    result.level_losses.push_back(std::move(losses));
    if (level == 0) result.converged = converged;
  }

  result.pose = pose.is_valid(1e-12) ? pose : pose.normalized();
  result.final_loss = current.loss.l_total;
  result.valid_fraction = static_cast<double>(current.loss.valid_count) /
                          (static_cast<double>(k.width) * static_cast<double>(k.height));
  if (result.valid_fraction < params.min_valid_fraction) {
    std::ostringstream msg;
    msg << "odometry: degenerate overlap, valid fraction " << result.valid_fraction << " < "
        << params.min_valid_fraction;
    throw DegenerateOverlap(msg.str(), result.valid_fraction);
  }
  return result;
}

}  // namespace tslam
