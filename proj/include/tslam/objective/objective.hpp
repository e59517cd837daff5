#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "tslam/core/parallel.hpp"
#include "tslam/core/raster.hpp"
#include "tslam/geometry/camera.hpp"
#include "tslam/geometry/sampling.hpp"
#include "tslam/geometry/se3.hpp"
#include "tslam/geometry/warp.hpp"
#include "tslam/objective/losses.hpp"
#include "tslam/objective/ssim.hpp"

namespace tslam {

/// The two views and their depths. Held by reference; the caller keeps them
/// alive for the lifetime of the object.
struct ViewPair {
  const ImageGray& target;
  const ImageGray& source;
  const DepthMap& target_depth;
  const DepthMap& source_depth;
  const Intrinsics& intrinsics;

  void validate() const {
    intrinsics.validate();
    require_intrinsics_shape(intrinsics, target.width(), target.height(), "view pair (target)");
    require_intrinsics_shape(intrinsics, source.width(), source.height(), "view pair (source)");
    require_intrinsics_shape(intrinsics, target_depth.width(), target_depth.height(), "view pair (target depth)");
    require_intrinsics_shape(intrinsics, source_depth.width(), source_depth.height(), "view pair (source depth)");
  }
};

struct ObjectiveOptions {
  /// Gate photometric pixels with the auto-mask. Direct odometry turns it off:
  /// at an identity initialization the warped and unwarped residuals coincide
  /// and the mask would exclude every pixel.
  bool use_auto_mask = true;
  /// Include the smoothness term (constant during pose-only estimation).
  bool include_smoothness = true;
};

/// Discrete choices held fixed across evaluations. The loss is piecewise smooth
/// between mask flips, bilinear cell crossings and sign changes of the L1
/// residuals; finite-difference checks compare against one smooth branch.
/// The cell and sign rasters are optional (empty = recomputed).
struct FrozenMasks {
  Mask validity;
  Mask auto_mask;
  Raster<int> cell_x, cell_y;           // top-left corner of the bilinear cell
  Raster<signed char> residual_sign;    // sign of Ihat - I_t
  Raster<signed char> depth_sign;       // sign of projected - sampled depth

  bool has_cells() const { return !cell_x.empty(); }
  bool has_signs() const { return !residual_sign.empty(); }
};

struct ObjectiveRequest {
  bool twist_gradient = false;
  bool depth_gradient = false;
  bool gauss_newton = false;
  bool keep_warp = false;
};

struct ObjectiveEvaluation {
  LossBreakdown loss;
  MaskStack masks;
  std::optional<WarpResult> warp;
  Twist grad_twist = Twist::Zero();
  Raster<double> grad_depth;
  Matrix6d gauss_newton = Matrix6d::Zero();
  std::size_t support_count = 0;  // |V and M_a|
};

namespace detail {

struct PixelState {
  Eigen::Vector3d xs = Eigen::Vector3d::Zero();  // target point in the source frame
  double iu = 0.0, iv = 0.0;                     // source image gradient at p_s
  double du = 0.0, dv = 0.0;                     // source depth gradient at p_s
};

// Jacobian of (u, v) with respect to a left twist perturbation, given the
// transformed point.
inline void projection_jacobian(const Intrinsics& k, const Eigen::Vector3d& p,
                                Eigen::Matrix<double, 2, 3>& d_uv_d_x) {
  const double iz = 1.0 / p.z();
  d_uv_d_x << k.fx * iz, 0.0, -k.fx * p.x() * iz * iz,
              0.0, k.fy * iz, -k.fy * p.y() * iz * iz;
}

inline Eigen::Matrix<double, 3, 6> point_twist_jacobian(const Eigen::Vector3d& p) {
  Eigen::Matrix<double, 3, 6> j;
  j.leftCols<3>() = -hat(p);
  j.rightCols<3>().setIdentity();
  return j;
}

}  // namespace detail

/// Evaluates L_total = L_rec + lambda_gc L_gc + lambda_sm L_sm at pose T_{t->s}
/// and, on request, its gradient with respect to a left twist perturbation
/// exp(xi) T, its gradient with respect to every target depth, and a
/// Gauss-Newton style approximation of the twist Hessian. Gradients are exact
/// for the smooth branch selected by the current discrete masks (V, M_a);
/// M_sd is differentiated.
inline ObjectiveEvaluation evaluate_objective(const ViewPair& views, const PoseSE3& t_to_s,
                                              const LossWeights& weights,
                                              const ObjectiveOptions& options = {},
                                              const FrozenMasks* frozen = nullptr,
                                              const ObjectiveRequest& request = {}) {
  views.validate();
  weights.validate();
  const Intrinsics& k = views.intrinsics;
  const int w = k.width, h = k.height;
  const ImageGray& it = views.target;
  const ImageGray& is = views.source;
  const DepthMap& dt = views.target_depth;
  const DepthMap& ds = views.source_depth;
  if (frozen) {
    require_same_shape(it, frozen->validity, "frozen validity");
    require_same_shape(it, frozen->auto_mask, "frozen auto-mask");
    if (frozen->has_cells()) {
      require_same_shape(it, frozen->cell_x, "frozen cells");
      require_same_shape(it, frozen->cell_y, "frozen cells");
    }
    if (frozen->has_signs()) {
      require_same_shape(it, frozen->residual_sign, "frozen signs");
      require_same_shape(it, frozen->depth_sign, "frozen signs");
    }
  }
  const bool frozen_cells = frozen && frozen->has_cells();
  const bool frozen_signs = frozen && frozen->has_signs();

  const bool want_grad = request.twist_gradient || request.depth_gradient || request.gauss_newton;
  const double lambda = weights.lambda_pm;

  ObjectiveEvaluation ev;
  WarpResult warp;
  warp.synthesized = ImageGray(w, h, 0.0);
  warp.validity = Mask(w, h, 0);
  warp.projected_depth = DepthMap(w, h);
  warp.sampled_depth = DepthMap(w, h);
  warp.source_u = Raster<double>(w, h, 0.0);
  warp.source_v = Raster<double>(w, h, 0.0);
  std::vector<detail::PixelState> state(want_grad ? static_cast<std::size_t>(w) * h : 0);

  const Eigen::Matrix3d& rot = t_to_s.rotation();
  const Eigen::Vector3d& trans = t_to_s.translation();

  // Pass 1: projection and sampling.
  parallel_for(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      if (!dt.is_valid(x, y)) continue;
      const Eigen::Vector3d xs = rot * (dt.depth(x, y) * k.unproject({double(x), double(y)})) + trans;
      warp.projected_depth.depth(x, y) = xs.z();
      if (!(xs.z() > kMinValidDepth)) continue;
      const PixelCoord ps = k.project(xs);
      warp.source_u(x, y) = ps.u;
      warp.source_v(x, y) = ps.v;
      if (frozen && !frozen->validity(x, y)) continue;
      BilinearCell cell = locate_cell(w, h, ps);
      if (frozen_cells) {
        // Extrapolate the frozen cell's bilinear patch.
        cell.x0 = frozen->cell_x(x, y);
        cell.y0 = frozen->cell_y(x, y);
        cell.x1 = std::min(cell.x0 + 1, w - 1);
        cell.y1 = std::min(cell.y0 + 1, h - 1);
        cell.a = ps.u - cell.x0;
        cell.b = ps.v - cell.y0;
        cell.valid = true;
      }
      if (!cell.valid || !cell.all_valid(ds.valid)) continue;
      warp.synthesized(x, y) = cell.interpolate(is);
      warp.sampled_depth.depth(x, y) = cell.interpolate(ds.depth);
      warp.sampled_depth.valid(x, y) = 1;
      warp.projected_depth.valid(x, y) = 1;
      warp.validity(x, y) = 1;
      if (want_grad) {
        auto& st = state[static_cast<std::size_t>(y) * w + x];
        st.xs = xs;
        cell.gradient(is, st.iu, st.iv);
        cell.gradient(ds.depth, st.du, st.dv);
      }
    }
  });

  // Masks.
  ev.masks.validity = warp.validity;
  if (frozen) {
    ev.masks.auto_mask = frozen->auto_mask;
  } else if (options.use_auto_mask) {
    ev.masks.auto_mask = auto_mask(it, is, warp);
  } else {
    ev.masks.auto_mask = Mask(w, h, 1);
  }
  ev.masks.dynamic_mask = Raster<double>(w, h, 1.0);
  Raster<double> d_diff(w, h, 0.0);
  for (std::size_t i = 0; i < d_diff.size(); ++i) {
    if (!warp.validity[i]) continue;
    const double za = warp.projected_depth.depth[i], zb = warp.sampled_depth.depth[i];
    d_diff[i] = frozen_signs ? frozen->depth_sign[i] * (za - zb) / (za + zb) : depth_inconsistency(za, zb);
    ev.masks.dynamic_mask[i] = 1.0 - d_diff[i];
  }

  // Pass 2: per-pixel photometric terms and SSIM derivative coefficients.
  struct SsimCoef {
    double alpha = 0.0, beta = 0.0, gamma = 0.0, mu_a = 0.0, mu_b = 0.0;
  };
  std::vector<SsimCoef> coef(want_grad ? static_cast<std::size_t>(w) * h : 0);
  Raster<double> penalty(w, h, 0.0);
  Raster<double> var_target(want_grad ? w : 0, want_grad ? h : 0, 0.0);
  std::vector<double> rec_row(h, 0.0), gc_row(h, 0.0);
  std::vector<std::size_t> support_row(h, 0), valid_row(h, 0);
  const Mask& v = warp.validity;
  parallel_for(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      if (!v(x, y)) continue;
      ++valid_row[y];
      gc_row[y] += d_diff(x, y);
      const bool in_support = ev.masks.auto_mask(x, y) != 0;
      if (!in_support && !want_grad) continue;
      const SsimWindow s = ssim_window(it, warp.synthesized, &v, x, y);
      if (want_grad) var_target(x, y) = s.var_a;
      if (!in_support) continue;
      ++support_row[y];
      const double rho =
          frozen_signs ? lambda * frozen->residual_sign(x, y) * (warp.synthesized(x, y) - it(x, y)) +
                             0.5 * (1.0 - lambda) * (1.0 - s.value)
                       : photometric_penalty(lambda, it(x, y), warp.synthesized(x, y), s.value);
      penalty(x, y) = rho;
      rec_row[y] += ev.masks.dynamic_mask(x, y) * rho;
      if (want_grad) {
        // Unnormalized here; scaled by -(1-lambda)/2 * M_sd / N below.
        auto& c = coef[static_cast<std::size_t>(y) * w + x];
        c.alpha = s.d_mu_b / s.n;
        c.beta = 2.0 * s.d_var_b / s.n;
        c.gamma = s.d_cov / s.n;
        c.mu_a = s.mu_a;
        c.mu_b = s.mu_b;
      }
    }
  });

  double rec_sum = 0.0, gc_sum = 0.0;
  std::size_t n_support = 0, n_valid = 0;
  for (int y = 0; y < h; ++y) {
    rec_sum += rec_row[y];
    gc_sum += gc_row[y];
    n_support += support_row[y];
    n_valid += valid_row[y];
  }
  ev.support_count = n_support;
  ev.loss.valid_count = n_valid;
  ev.loss.l_rec = n_support ? rec_sum / static_cast<double>(n_support) : 0.0;
  ev.loss.l_gc = n_valid ? gc_sum / static_cast<double>(n_valid) : 0.0;
  ev.loss.l_sm = options.include_smoothness ? smoothness_loss(dt, it) : 0.0;
  ev.loss.l_total = ev.loss.l_rec + weights.lambda_gc * ev.loss.l_gc + weights.lambda_sm * ev.loss.l_sm;

  if (want_grad) {
    const double inv_support = n_support ? 1.0 / static_cast<double>(n_support) : 0.0;
    const double inv_valid = n_valid ? 1.0 / static_cast<double>(n_valid) : 0.0;
    const double ssim_scale = -0.5 * (1.0 - lambda) * inv_support;
    for (std::size_t i = 0; i < coef.size(); ++i) {
      if (!v[i] || !ev.masks.auto_mask[i]) continue;
      const double s = ssim_scale * ev.masks.dynamic_mask[i];
      coef[i].alpha *= s;
      coef[i].beta *= s;
      coef[i].gamma *= s;
    }

    if (request.depth_gradient) {
      ev.grad_depth = options.include_smoothness && weights.lambda_sm > 0.0
                          ? smoothness_gradient(dt, it)
                          : Raster<double>(w, h, 0.0);
      if (options.include_smoothness) {
        for (std::size_t i = 0; i < ev.grad_depth.size(); ++i) ev.grad_depth[i] *= weights.lambda_sm;
      }
    }

    std::vector<Twist> grad_row(h, Twist::Zero());
    std::vector<Matrix6d> hess_row(request.gauss_newton ? h : 0, Matrix6d::Zero());
    constexpr double kResidualFloor = 1e-2;
    constexpr double kRelDepthFloor = 1e-3;

    // Pass 3: chain rule, gathering SSIM contributions from every window that
    // contains the pixel.
    parallel_for(h, [&](int y) {
      for (int x = 0; x < w; ++x) {
        if (!v(x, y)) continue;
        const std::size_t idx = static_cast<std::size_t>(y) * w + x;
        const detail::PixelState& st = state[idx];
        const bool in_support = ev.masks.auto_mask(x, y) != 0;
        const double a_q = it(x, y);
        const double b_q = warp.synthesized(x, y);

        // dL_rec / d Ihat(q), holding M_sd fixed.
        double g_img = 0.0;
        if (in_support) {
          const double r = b_q - a_q;
          const double sgn = frozen_signs ? frozen->residual_sign(x, y) : (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0));
          g_img += lambda * ev.masks.dynamic_mask(x, y) * inv_support * sgn;
        }
        for (int dy = -1; dy <= 1; ++dy) {
          const int py = y + dy;
          if (py < 0 || py >= h) continue;
          for (int dx = -1; dx <= 1; ++dx) {
            const int px = x + dx;
            if (px < 0 || px >= w) continue;
            if (!v(px, py) || !ev.masks.auto_mask(px, py)) continue;
            const auto& c = coef[static_cast<std::size_t>(py) * w + px];
            g_img += c.alpha + c.beta * (b_q - c.mu_b) + c.gamma * (a_q - c.mu_a);
          }
        }

        // Coefficient on d(D_diff(q)): through M_sd in L_rec and through L_gc.
        const double za = warp.projected_depth.depth(x, y);
        const double zb = warp.sampled_depth.depth(x, y);
        const double e = za - zb;
        const double sum = za + zb;
        const double sgn_e = frozen_signs ? frozen->depth_sign(x, y) : (e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0));
        const double dd_da = sgn_e / sum - sgn_e * e / (sum * sum);
        const double dd_db = -sgn_e / sum - sgn_e * e / (sum * sum);
        double kappa = weights.lambda_gc * inv_valid;
        if (in_support) kappa -= penalty(x, y) * inv_support;

        Eigen::Matrix<double, 2, 3> duv_dx;
        detail::projection_jacobian(k, st.xs, duv_dx);
        const Eigen::RowVector3d dimg_dx = Eigen::RowVector2d(st.iu, st.iv) * duv_dx;
        const Eigen::RowVector3d dds_dx = Eigen::RowVector2d(st.du, st.dv) * duv_dx;
        const Eigen::RowVector3d dz_dx(0.0, 0.0, 1.0);
        const Eigen::RowVector3d ddiff_dx = dd_da * dz_dx + dd_db * dds_dx;

        if (request.twist_gradient || request.gauss_newton) {
          const Eigen::Matrix<double, 3, 6> dx_dxi = detail::point_twist_jacobian(st.xs);
          const Eigen::Matrix<double, 1, 6> j_img = dimg_dx * dx_dxi;
          const Eigen::Matrix<double, 1, 6> j_diff = ddiff_dx * dx_dxi;
          if (request.twist_gradient) {
            grad_row[y] += (g_img * j_img + kappa * j_diff).transpose();
          }
          if (request.gauss_newton) {
            double wi = 0.0;
            if (in_support) {
              wi = ev.masks.dynamic_mask(x, y) * inv_support *
                   (lambda / std::max(std::abs(b_q - a_q), kResidualFloor) +
                    (1.0 - lambda) / (2.0 * var_target(x, y) + kSsimC2));
            }
            const Eigen::Matrix<double, 1, 6> j_e = (dz_dx - dds_dx) * dx_dxi;
            const double we = weights.lambda_gc * inv_valid / (sum * std::max(std::abs(e), kRelDepthFloor * sum));
            hess_row[y].noalias() += wi * j_img.transpose() * j_img + we * j_e.transpose() * j_e;
          }
        }
        if (request.depth_gradient) {
          const Eigen::Vector3d dx_dd = rot * k.unproject({double(x), double(y)});
          ev.grad_depth(x, y) += g_img * dimg_dx.dot(dx_dd) + kappa * ddiff_dx.dot(dx_dd);
        }
      }
    });
    for (int y = 0; y < h; ++y) ev.grad_twist += grad_row[y];
    if (request.gauss_newton) {
      for (int y = 0; y < h; ++y) ev.gauss_newton += hess_row[y];
    }
  }

  if (request.keep_warp) ev.warp = std::move(warp);
  return ev;
}

/// Freezes every discrete choice of the objective at pose T_{t->s}: V, M_a,
/// the bilinear cells and the residual signs.
inline FrozenMasks freeze_branch(const ViewPair& views, const PoseSE3& t_to_s, const LossWeights& weights,
                                 const ObjectiveOptions& options = {}) {
  ObjectiveRequest req;
  req.keep_warp = true;
  const ObjectiveEvaluation ev = evaluate_objective(views, t_to_s, weights, options, nullptr, req);
  const int w = views.intrinsics.width, h = views.intrinsics.height;
  const WarpResult& warp = *ev.warp;
  FrozenMasks f{ev.masks.validity, ev.masks.auto_mask, Raster<int>(w, h, 0), Raster<int>(w, h, 0),
                Raster<signed char>(w, h, 0), Raster<signed char>(w, h, 0)};
  auto sign = [](double v) -> signed char { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!f.validity(x, y)) continue;
      const BilinearCell cell = locate_cell(w, h, {warp.source_u(x, y), warp.source_v(x, y)});
      f.cell_x(x, y) = cell.x0;
      f.cell_y(x, y) = cell.y0;
      f.residual_sign(x, y) = sign(warp.synthesized(x, y) - views.target(x, y));
      f.depth_sign(x, y) = sign(warp.projected_depth.depth(x, y) - warp.sampled_depth.depth(x, y));
    }
  }
  return f;
}

/// Total loss: inverse warp, V / M_a / M_sd, the three terms.
inline LossBreakdown total_loss(const ImageGray& target, const ImageGray& source, const DepthMap& target_depth,
                                const DepthMap& source_depth, const PoseSE3& t_to_s, const Intrinsics& k,
                                const LossWeights& weights, const ObjectiveOptions& options = {}) {
  return evaluate_objective({target, source, target_depth, source_depth, k}, t_to_s, weights, options).loss;
}

struct LossGradient {
  Twist twist = Twist::Zero();  // d L_total / d xi for T <- exp(xi) T
  Raster<double> depth;         // d L_total / d D_t(p); 0 at invalid pixels
};

inline LossGradient loss_gradient(const ImageGray& target, const ImageGray& source, const DepthMap& target_depth,
                                  const DepthMap& source_depth, const PoseSE3& t_to_s, const Intrinsics& k,
                                  const LossWeights& weights, const ObjectiveOptions& options = {},
                                  const FrozenMasks* frozen = nullptr) {
  ObjectiveRequest req;
  req.twist_gradient = true;
  req.depth_gradient = true;
  auto ev = evaluate_objective({target, source, target_depth, source_depth, k}, t_to_s, weights, options, frozen, req);
  return {ev.grad_twist, std::move(ev.grad_depth)};
}

}  // namespace tslam
