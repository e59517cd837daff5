#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <limits>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "tslam/core/error.hpp"
#include "tslam/geometry/se3.hpp"

namespace tslam {

struct TimedPose {
  double timestamp = 0.0;  // seconds
  PoseSE3 pose;
};

/// Poses with strictly increasing timestamps.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::vector<TimedPose> poses) : poses_(std::move(poses)) { validate(); }

  static Trajectory from_poses(const std::vector<double>& timestamps, const std::vector<PoseSE3>& poses) {
    if (timestamps.size() != poses.size()) throw ShapeError("trajectory: timestamp/pose count mismatch");
    std::vector<TimedPose> tp;
    tp.reserve(poses.size());
    for (std::size_t i = 0; i < poses.size(); ++i) tp.push_back({timestamps[i], poses[i]});
    return Trajectory(std::move(tp));
  }

  void push_back(const TimedPose& p) {
    if (!std::isfinite(p.timestamp)) throw InvalidArgument("trajectory: non-finite timestamp");
    if (!poses_.empty() && !(p.timestamp > poses_.back().timestamp)) {
      throw InvalidArgument("trajectory: timestamps must be strictly increasing");
    }
    poses_.push_back(p);
  }

  const std::vector<TimedPose>& poses() const { return poses_; }
  std::size_t size() const { return poses_.size(); }
  bool empty() const { return poses_.empty(); }
  const TimedPose& operator[](std::size_t i) const { return poses_[i]; }

  std::vector<PoseSE3> pose_list() const {
    std::vector<PoseSE3> out;
    out.reserve(poses_.size());
    for (const auto& p : poses_) out.push_back(p.pose);
    return out;
  }

 private:
  void validate() const {
    for (std::size_t i = 0; i < poses_.size(); ++i) {
      if (!std::isfinite(poses_[i].timestamp)) throw InvalidArgument("trajectory: non-finite timestamp");
      if (i > 0 && !(poses_[i].timestamp > poses_[i - 1].timestamp)) {
        throw InvalidArgument("trajectory: timestamps must be strictly increasing");
      }
    }
  }

  std::vector<TimedPose> poses_;
};

/// TUM lines: `timestamp tx ty tz qx qy qz qw`, '#' comments.
inline void write_tum(std::ostream& os, const Trajectory& traj) {
  os << std::fixed;
  for (const auto& p : traj.poses()) {
    const Eigen::Quaterniond q = p.pose.quaternion();
    const Eigen::Vector3d& t = p.pose.translation();
    os << std::setprecision(6) << p.timestamp << std::setprecision(9) << ' ' << t.x() << ' ' << t.y() << ' ' << t.z()
       << ' ' << q.x() << ' ' << q.y() << ' ' << q.z() << ' ' << q.w() << '\n';
  }
}

inline void write_tum_file(const std::string& path, const Trajectory& traj) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot open '" + path + "' for writing");
  write_tum(os, traj);
}

/// Errors name the source and 1-based line number.
inline Trajectory read_tum(std::istream& is, const std::string& name = "<tum>") {
  Trajectory traj;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ls(line);
    double v[8];
    for (double& x : v) {
      if (!(ls >> x)) throw InvalidArgument(name + ":" + std::to_string(lineno) + ": unparseable trajectory line");
    }
    std::string extra;
    if (ls >> extra) throw InvalidArgument(name + ":" + std::to_string(lineno) + ": trailing fields");
    const Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (!(q.norm() > 1e-12) || !std::isfinite(q.norm())) {
      throw InvalidArgument(name + ":" + std::to_string(lineno) + ": invalid quaternion");
    }
    try {
      traj.push_back({v[0], PoseSE3::from_quaternion(q.normalized(), {v[1], v[2], v[3]})});
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(name + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return traj;
}

inline Trajectory read_tum_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open '" + path + "'");
  return read_tum(is, path);
}

inline constexpr double kDefaultMaxTimeDifference = 0.05;

struct Association {
  std::vector<PoseSE3> estimate;
  std::vector<PoseSE3> reference;
  std::vector<double> timestamps;  // estimate timestamps of matched pairs
  std::size_t dropped_estimate = 0;
  std::size_t dropped_reference = 0;
};

/// Nearest-neighbor matching within max_dt, one-to-one, order preserving.
/// When two estimate poses pick the same reference pose the closer one wins.
inline Association associate(const Trajectory& est, const Trajectory& ref,
                             double max_dt = kDefaultMaxTimeDifference) {
  if (!(max_dt >= 0.0)) throw InvalidArgument("associate: max_dt must be >= 0");
  std::vector<int> match(est.size(), -1);
  std::vector<double> gap(est.size(), 0.0);
  const auto& r = ref.poses();
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double t = est[i].timestamp;
    auto it = std::lower_bound(r.begin(), r.end(), t, [](const TimedPose& p, double v) { return p.timestamp < v; });
    int best = -1;
    double best_dt = std::numeric_limits<double>::infinity();
    if (it != r.end()) {
      best = static_cast<int>(it - r.begin());
      best_dt = it->timestamp - t;
    }
    if (it != r.begin() && t - std::prev(it)->timestamp < best_dt) {
      best = static_cast<int>(std::prev(it) - r.begin());
      best_dt = t - std::prev(it)->timestamp;
    }
    match[i] = best_dt <= max_dt ? best : -1;
    gap[i] = best_dt;
  }
  // Resolve collisions; matches are non-decreasing so duplicates are adjacent.
  std::ptrdiff_t kept = -1;
  for (std::size_t i = 0; i < est.size(); ++i) {
    if (match[i] < 0) continue;
    if (kept >= 0 && match[i] == match[kept]) {
      if (gap[i] < gap[kept]) {
        match[kept] = -1;
      } else {
        match[i] = -1;
        continue;
      }
    }
    kept = static_cast<std::ptrdiff_t>(i);
  }
  Association a;
  std::vector<char> used(ref.size(), 0);
  for (std::size_t i = 0; i < est.size(); ++i) {
    if (match[i] < 0) {
      ++a.dropped_estimate;
      continue;
    }
    used[match[i]] = 1;
    a.estimate.push_back(est[i].pose);
    a.reference.push_back(ref[match[i]].pose);
    a.timestamps.push_back(est[i].timestamp);
  }
  a.dropped_reference = static_cast<std::size_t>(std::count(used.begin(), used.end(), 0));
  return a;
}

/// x -> scale * rotation * x + translation.
struct Similarity3 {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double scale = 1.0;

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return scale * (rotation * p) + translation; }
  PoseSE3 apply(const PoseSE3& p) const { return PoseSE3(rotation * p.rotation(), apply(p.translation())); }
};

enum class Alignment { None, Rigid, Similarity };

inline const char* to_string(Alignment a) {
  switch (a) {
    case Alignment::None: return "none";
    case Alignment::Rigid: return "rigid";
    case Alignment::Similarity: return "sim3";
  }
  return "?";
}

inline Alignment parse_alignment(const std::string& s) {
  if (s == "none") return Alignment::None;
  if (s == "rigid" || s == "se3") return Alignment::Rigid;
  if (s == "sim3" || s == "similarity") return Alignment::Similarity;
  throw InvalidArgument("unknown alignment '" + s + "'");
}

/// Least-squares transform taking estimate positions onto reference positions
/// (Umeyama). Throws DomainError for fewer than 3 points or collinear sets.
inline Similarity3 umeyama(const std::vector<Eigen::Vector3d>& est, const std::vector<Eigen::Vector3d>& ref,
                           bool with_scale) {
  if (est.size() != ref.size()) throw ShapeError("align: point count mismatch");
  const std::size_t n = est.size();
  if (n < 3) throw DomainError("align: need at least 3 correspondences");
  Eigen::Vector3d me = Eigen::Vector3d::Zero(), mr = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    me += est[i];
    mr += ref[i];
  }
  me /= double(n);
  mr /= double(n);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero(), ce = Eigen::Matrix3d::Zero(), cr = Eigen::Matrix3d::Zero();
  double var_e = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d de = est[i] - me, dr = ref[i] - mr;
    cov += dr * de.transpose();
    ce += de * de.transpose();
    cr += dr * dr.transpose();
    var_e += de.squaredNorm();
  }
  cov /= double(n);
  var_e /= double(n);
  auto rank_ok = [](const Eigen::Matrix3d& c) {
    const Eigen::Vector3d sv = Eigen::JacobiSVD<Eigen::Matrix3d>(c).singularValues();
    return sv(0) > 0.0 && sv(1) > 1e-12 * sv(0);
  };
  if (!rank_ok(ce) || !rank_ok(cr)) throw DomainError("align: degenerate (collinear or coincident) point set");
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d s = Eigen::Matrix3d::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s(2, 2) = -1.0;
  Similarity3 out;
  out.rotation = svd.matrixU() * s * svd.matrixV().transpose();
  out.scale = with_scale ? (svd.singularValues().asDiagonal() * s).trace() / var_e : 1.0;
  out.translation = mr - out.scale * (out.rotation * me);
  return out;
}

struct AlignedTrajectory {
  std::vector<PoseSE3> poses;
  Similarity3 transform;
};

/// Aligns associated pose lists. None returns the estimate unchanged.
inline AlignedTrajectory align_trajectories(const std::vector<PoseSE3>& est, const std::vector<PoseSE3>& ref,
                                            Alignment mode) {
  if (est.size() != ref.size()) throw ShapeError("align: pose count mismatch");
  AlignedTrajectory out;
  if (mode != Alignment::None) {
    std::vector<Eigen::Vector3d> pe, pr;
    for (std::size_t i = 0; i < est.size(); ++i) {
      pe.push_back(est[i].translation());
      pr.push_back(ref[i].translation());
    }
    out.transform = umeyama(pe, pr, mode == Alignment::Similarity);
  }
  out.poses.reserve(est.size());
  for (const auto& p : est) out.poses.push_back(mode == Alignment::None ? p : out.transform.apply(p));
  return out;
}
inline AlignedTrajectory align_trajectories(const std::vector<PoseSE3>& est, const std::vector<PoseSE3>& ref,
                                            bool with_scale) {
  return align_trajectories(est, ref, with_scale ? Alignment::Similarity : Alignment::Rigid);
}

/// RMS of position differences of already associated poses.
inline double ate_rmse(const std::vector<PoseSE3>& est, const std::vector<PoseSE3>& ref) {
  if (est.size() != ref.size()) throw ShapeError("ate: pose count mismatch");
  if (est.empty()) throw EmptyResult("ate: no associated poses");
  double acc = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) acc += (est[i].translation() - ref[i].translation()).squaredNorm();
  return std::sqrt(acc / double(est.size()));
}

enum class RpeStatistic { Mean, Rms };

/// Geodesic angle of Q_rel^-1 P_rel over pairs (i, i + delta), in degrees.
inline double rpe_rotation(const std::vector<PoseSE3>& est, const std::vector<PoseSE3>& ref, int delta = 1,
                           RpeStatistic stat = RpeStatistic::Mean) {
  if (est.size() != ref.size()) throw ShapeError("rpe: pose count mismatch");
  if (delta < 1) throw InvalidArgument("rpe: delta must be >= 1");
  if (est.size() <= static_cast<std::size_t>(delta)) throw EmptyResult("rpe: trajectory shorter than delta + 1");
  double acc = 0.0;
  const std::size_t m = est.size() - delta;
  for (std::size_t i = 0; i < m; ++i) {
    const Eigen::Matrix3d p = est[i].rotation().transpose() * est[i + delta].rotation();
    const Eigen::Matrix3d q = ref[i].rotation().transpose() * ref[i + delta].rotation();
    const double a = rad2deg(rotation_angle(q.transpose() * p));
    acc += stat == RpeStatistic::Mean ? a : a * a;
  }
  return stat == RpeStatistic::Mean ? acc / double(m) : std::sqrt(acc / double(m));
}

struct TrajectoryEvalOptions {
  Alignment alignment = Alignment::Similarity;
  double max_time_difference = kDefaultMaxTimeDifference;
  int rpe_delta = 1;
  RpeStatistic rpe_statistic = RpeStatistic::Mean;
};

struct TrajectoryEvalReport {
  double ate_rmse = 0.0;
  double rpe_deg = 0.0;
  std::size_t associated = 0;
  std::size_t dropped_estimate = 0;
  std::size_t dropped_reference = 0;
  Alignment alignment = Alignment::Similarity;
  double scale = 1.0;
};

/// Associate, align, then ATE and RPE. Throws EmptyResult with no
/// associations.
inline TrajectoryEvalReport evaluate_trajectory(const Trajectory& est, const Trajectory& ref,
                                                const TrajectoryEvalOptions& opt = {}) {
  const Association a = associate(est, ref, opt.max_time_difference);
  if (a.estimate.empty()) throw EmptyResult("no associations");
  TrajectoryEvalReport rep;
  rep.associated = a.estimate.size();
  rep.dropped_estimate = a.dropped_estimate;
  rep.dropped_reference = a.dropped_reference;
  rep.alignment = opt.alignment;
  const AlignedTrajectory al = align_trajectories(a.estimate, a.reference, opt.alignment);
  rep.scale = al.transform.scale;
  rep.ate_rmse = ate_rmse(al.poses, a.reference);
  rep.rpe_deg = a.estimate.size() > static_cast<std::size_t>(opt.rpe_delta)
                    ? rpe_rotation(a.estimate, a.reference, opt.rpe_delta, opt.rpe_statistic)
                    : 0.0;
  return rep;
}

}  // namespace tslam
