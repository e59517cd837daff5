#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "tslam/core/error.hpp"

namespace tslam {

using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

/// se(3) element ordered (omega, v): rotation part in radians first, then
/// translation part in meters.
using Twist = Vector6d;

inline Twist make_twist(const Eigen::Vector3d& omega, const Eigen::Vector3d& v) {
  Twist xi;
  xi << omega, v;
  return xi;
}

inline Eigen::Matrix3d hat(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

inline Eigen::Vector3d vee(const Eigen::Matrix3d& m) {
  return {m(2, 1), m(0, 2), m(1, 0)};
}

/// Rigid transform x -> R x + t.
class PoseSE3 {
 public:
  PoseSE3() : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}
  PoseSE3(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
      : rotation_(rotation), translation_(translation) {}

  static PoseSE3 identity() { return {}; }
  static PoseSE3 translation_only(const Eigen::Vector3d& t) {
    return {Eigen::Matrix3d::Identity(), t};
  }
  static PoseSE3 from_quaternion(const Eigen::Quaterniond& q, const Eigen::Vector3d& t) {
    return {q.normalized().toRotationMatrix(), t};
  }

  const Eigen::Matrix3d& rotation() const noexcept { return rotation_; }
  const Eigen::Vector3d& translation() const noexcept { return translation_; }

  PoseSE3 inverse() const {
    const Eigen::Matrix3d rt = rotation_.transpose();
    return {rt, -(rt * translation_)};
  }

  PoseSE3 operator*(const PoseSE3& other) const {
    return {rotation_ * other.rotation_, rotation_ * other.translation_ + translation_};
  }

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const {
    return rotation_ * p + translation_;
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation_;
    m.topRightCorner<3, 1>() = translation_;
    return m;
  }

  Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(rotation_).normalized(); }

  /// Projects the rotation back onto SO(3) (nearest orthonormal matrix).
  PoseSE3 normalized() const {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(rotation_, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
      Eigen::Matrix3d u = svd.matrixU();
      u.col(2) *= -1.0;
      r = u * svd.matrixV().transpose();
    }
    return {r, translation_};
  }

  /// Orthonormality and det(R) = +1 up to tol.
  bool is_valid(double tol = 1e-9) const {
    if (!rotation_.allFinite() || !translation_.allFinite()) return false;
    const double ortho = (rotation_.transpose() * rotation_ - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    return ortho < tol && std::abs(rotation_.determinant() - 1.0) < tol;
  }

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

/// Rotation angle of R in [0, pi].
inline double rotation_angle(const Eigen::Matrix3d& r) {
  const double s = 0.5 * vee(r - r.transpose()).norm();
  const double c = 0.5 * (r.trace() - 1.0);
  return std::atan2(s, c);
}

inline Eigen::Matrix3d so3_exp(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  const Eigen::Matrix3d wx = hat(w);
  if (theta < 1e-8) {
    return Eigen::Matrix3d::Identity() + wx + 0.5 * wx * wx;
  }
  const double half = 0.5 * theta;
  const double a = std::sin(theta) / theta;
  const double b = 2.0 * std::sin(half) * std::sin(half) / (theta * theta);
  return Eigen::Matrix3d::Identity() + a * wx + b * wx * wx;
}

inline Eigen::Vector3d so3_log(const Eigen::Matrix3d& r) {
  const Eigen::Vector3d axis_sin = 0.5 * vee(r - r.transpose());
  const double s = axis_sin.norm();
  const double c = 0.5 * (r.trace() - 1.0);
  const double theta = std::atan2(s, c);
  if (theta >= std::numbers::pi - 1e-6) {
    throw DomainError("SE(3) log: rotation angle too close to pi");
  }
  if (theta < 1e-6) {
    return (1.0 + theta * theta / 6.0) * axis_sin;
  }
  if (theta < 2.5) {
    return (theta / s) * axis_sin;
  }
  // Close to pi the antisymmetric part is small; recover the axis from the
  // symmetric part (1 - cos) a a^T and take its sign from axis_sin.
  const Eigen::Matrix3d b = 0.5 * (r + r.transpose()) - c * Eigen::Matrix3d::Identity();
  int k = 0;
  b.diagonal().maxCoeff(&k);
  Eigen::Vector3d axis = b.col(k).normalized();
  if (axis.dot(axis_sin) < 0.0) axis = -axis;
  return theta * axis;
}

/// V(omega): maps v to the translation of exp(omega, v). Equal to the SO(3)
/// left Jacobian.
inline Eigen::Matrix3d so3_left_jacobian(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  const Eigen::Matrix3d wx = hat(w);
  double b, c;
  if (theta < 1e-4) {
    const double t2 = theta * theta;
    b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
    c = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
  } else {
    const double half = 0.5 * theta;
    b = 2.0 * std::sin(half) * std::sin(half) / (theta * theta);
    c = (theta - std::sin(theta)) / (theta * theta * theta);
  }
  return Eigen::Matrix3d::Identity() + b * wx + c * wx * wx;
}

inline Eigen::Matrix3d so3_left_jacobian_inverse(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  const Eigen::Matrix3d wx = hat(w);
  double d;
  if (theta < 1e-4) {
    const double t2 = theta * theta;
    d = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  } else {
    const double half = 0.5 * theta;
    d = (1.0 - theta * std::cos(half) / (2.0 * std::sin(half))) / (theta * theta);
  }
  return Eigen::Matrix3d::Identity() - 0.5 * wx + d * wx * wx;
}

/// Closed-form exponential map (Rodrigues); series form below |omega| = 1e-8.
inline PoseSE3 se3_exp(const Twist& xi) {
  const Eigen::Vector3d w = xi.head<3>();
  const Eigen::Vector3d v = xi.tail<3>();
  return {so3_exp(w), so3_left_jacobian(w) * v};
}

/// Inverse of se3_exp. Throws DomainError when the rotation angle is within
/// 1e-6 of pi.
inline Twist se3_log(const PoseSE3& t) {
  const Eigen::Vector3d w = so3_log(t.rotation());
  return make_twist(w, so3_left_jacobian_inverse(w) * t.translation());
}

/// Adjoint in (omega, v) ordering: T exp(xi) T^-1 = exp(Ad_T xi).
inline Matrix6d adjoint(const PoseSE3& t) {
  Matrix6d ad = Matrix6d::Zero();
  ad.topLeftCorner<3, 3>() = t.rotation();
  ad.bottomRightCorner<3, 3>() = t.rotation();
  ad.bottomLeftCorner<3, 3>() = hat(t.translation()) * t.rotation();
  return ad;
}

/// SE(3) left Jacobian: exp(xi + d) ~= exp(J_l(xi) d) exp(xi).
inline Matrix6d se3_left_jacobian(const Twist& xi) {
  const Eigen::Vector3d phi = xi.head<3>();
  const Eigen::Vector3d rho = xi.tail<3>();
  const double theta = phi.norm();
  const Eigen::Matrix3d px = hat(phi);
  const Eigen::Matrix3d rx = hat(rho);

  double c1, c2, c3;
  if (theta < 1e-2) {
    const double t2 = theta * theta;
    c1 = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
    c2 = 1.0 / 24.0 - t2 / 720.0 + t2 * t2 / 40320.0;
    c3 = 1.0 / 120.0 - t2 / 2520.0 + t2 * t2 / 120960.0;
  } else {
    const double s = std::sin(theta), c = std::cos(theta);
    const double t2 = theta * theta, t3 = t2 * theta;
    c1 = (theta - s) / t3;
    c2 = (t2 + 2.0 * c - 2.0) / (2.0 * t2 * t2);
    c3 = (2.0 * theta - 3.0 * s + theta * c) / (2.0 * t2 * t3);
  }
  const Eigen::Matrix3d q = 0.5 * rx + c1 * (px * rx + rx * px + px * rx * px) +
                            c2 * (px * px * rx + rx * px * px - 3.0 * px * rx * px) +
                            c3 * (px * rx * px * px + px * px * rx * px);
  const Eigen::Matrix3d j = so3_left_jacobian(phi);
  Matrix6d out = Matrix6d::Zero();
  out.topLeftCorner<3, 3>() = j;
  out.bottomRightCorner<3, 3>() = j;
  out.bottomLeftCorner<3, 3>() = q;
  return out;
}

/// SE(3) right Jacobian: exp(xi + d) ~= exp(xi) exp(J_r(xi) d).
inline Matrix6d se3_right_jacobian(const Twist& xi) { return se3_left_jacobian(-xi); }

inline Matrix6d se3_right_jacobian_inverse(const Twist& xi) {
  const Matrix6d jr = se3_right_jacobian(xi);
  const Eigen::Matrix3d ji = jr.topLeftCorner<3, 3>().inverse();
  Matrix6d out = Matrix6d::Zero();
  out.topLeftCorner<3, 3>() = ji;
  out.bottomRightCorner<3, 3>() = ji;
  out.bottomLeftCorner<3, 3>() = -ji * jr.bottomLeftCorner<3, 3>() * ji;
  return out;
}

/// Translational and rotational distance between two poses.
inline double translation_error(const PoseSE3& a, const PoseSE3& b) {
  return (a.translation() - b.translation()).norm();
}
inline double rotation_error_rad(const PoseSE3& a, const PoseSE3& b) {
  return rotation_angle(a.rotation().transpose() * b.rotation());
}

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

}  // namespace tslam
