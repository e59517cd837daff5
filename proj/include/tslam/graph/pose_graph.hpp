#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "tslam/core/error.hpp"
#include "tslam/geometry/se3.hpp"

namespace tslam {

enum class EdgeKind { Odometry, Loop };

inline const char* to_string(EdgeKind k) { return k == EdgeKind::Odometry ? "odometry" : "loop"; }

struct PoseNode {
  int id = 0;
  PoseSE3 global_pose;  // world <- frame
};

struct GraphEdge {
  int from_id = 0;
  int to_id = 0;
  PoseSE3 relative;  // measured T_from^-1 T_to
  Matrix6d information = Matrix6d::Identity();  // twist order (omega, v)
  EdgeKind kind = EdgeKind::Odometry;
};

/// Information must be symmetric with no negative eigenvalue. Semi-definite
/// matrices are accepted so an edge can be switched off with zero weight.
inline void validate_information(const Matrix6d& info) {
  if (!info.allFinite()) throw InvalidArgument("pose graph: information has non-finite entries");
  const double scale = std::max(1.0, info.cwiseAbs().maxCoeff());
  if ((info - info.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw InvalidArgument("pose graph: information matrix is not symmetric");
  }
  const Eigen::SelfAdjointEigenSolver<Matrix6d> es(0.5 * (info + info.transpose()));
  if (es.eigenvalues().minCoeff() < -1e-12 * scale) {
    throw InvalidArgument("pose graph: information matrix has a negative eigenvalue");
  }
}

class PoseGraph {
 public:
  /// Seeds node 0 at the given pose (identity by default).
  explicit PoseGraph(const PoseSE3& origin = PoseSE3::identity()) { nodes_.push_back({0, origin}); }

  const std::vector<PoseNode>& nodes() const { return nodes_; }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  int fixed_id() const { return fixed_id_; }

  void set_fixed_id(int id) {
    require_node(id);
    fixed_id_ = id;
  }

  const PoseSE3& pose(int id) const {
    require_node(id);
    return nodes_[id].global_pose;
  }
  void set_pose(int id, const PoseSE3& p) {
    require_node(id);
    nodes_[id].global_pose = p;
  }

  std::vector<PoseSE3> poses() const {
    std::vector<PoseSE3> out;
    out.reserve(nodes_.size());
    for (const auto& n : nodes_) out.push_back(n.global_pose);
    return out;
  }
  void set_poses(const std::vector<PoseSE3>& p) {
    if (p.size() != nodes_.size()) throw ShapeError("pose graph: pose count mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) nodes_[i].global_pose = p[i];
  }

  int add_node(const PoseSE3& global_pose) {
    nodes_.push_back({size(), global_pose});
    return size() - 1;
  }

  void add_edge(const GraphEdge& e) {
    require_node(e.from_id);
    require_node(e.to_id);
    if (e.from_id == e.to_id) throw InvalidArgument("pose graph: edge endpoints must differ");
    validate_information(e.information);
    edges_.push_back(e);
  }

  /// True iff every node is reachable from the fixed node.
  bool is_connected() const {
    std::vector<std::vector<int>> adj(nodes_.size());
    for (const auto& e : edges_) {
      adj[e.from_id].push_back(e.to_id);
      adj[e.to_id].push_back(e.from_id);
    }
    std::vector<char> seen(nodes_.size(), 0);
    std::vector<int> stack{fixed_id_};
    seen[fixed_id_] = 1;
    std::size_t count = 1;
    while (!stack.empty()) {
      const int n = stack.back();
      stack.pop_back();
      for (int m : adj[n]) {
        if (!seen[m]) {
          seen[m] = 1;
          ++count;
          stack.push_back(m);
        }
      }
    }
    return count == nodes_.size();
  }

 private:
  void require_node(int id) const {
    if (id < 0 || id >= size()) throw InvalidArgument("pose graph: unknown node id " + std::to_string(id));
  }

  std::vector<PoseNode> nodes_;
  std::vector<GraphEdge> edges_;
  int fixed_id_ = 0;
};

/// Adds a node at last_pose * relative and the odometry edge to it.
inline int append_odometry(PoseGraph& graph, const PoseSE3& relative,
                           const Matrix6d& information = Matrix6d::Identity()) {
  const int prev = graph.size() - 1;
  const int id = graph.add_node(graph.pose(prev) * relative);
  graph.add_edge({prev, id, relative, information, EdgeKind::Odometry});
  return id;
}

/// se3_log(relative^-1 * pose_from^-1 * pose_to).
inline Twist edge_residual(const GraphEdge& e, const PoseSE3& pose_from, const PoseSE3& pose_to) {
  return se3_log(e.relative.inverse() * (pose_from.inverse() * pose_to));
}
inline Twist edge_residual(const GraphEdge& e, const std::vector<PoseSE3>& poses) {
  if (e.from_id < 0 || e.to_id < 0 || e.from_id >= static_cast<int>(poses.size()) ||
      e.to_id >= static_cast<int>(poses.size())) {
    throw InvalidArgument("edge_residual: endpoint out of range");
  }
  return edge_residual(e, poses[e.from_id], poses[e.to_id]);
}

struct OptimizeOptions {
  int max_iterations = 100;
  double tol = 1e-10;  // step-norm threshold
  double damping_init = 1e-4;
  /// Huber threshold on the whitened residual norm; disabled when unset.
  std::optional<double> huber_delta;

  void validate() const {
    if (max_iterations < 0) throw InvalidArgument("optimize: max_iterations must be >= 0");
    if (!(tol > 0.0)) throw InvalidArgument("optimize: tol must be positive");
    if (!(damping_init > 0.0)) throw InvalidArgument("optimize: damping_init must be positive");
    if (huber_delta && !(*huber_delta > 0.0)) throw InvalidArgument("optimize: huber delta must be positive");
  }
};

struct OptimizeReport {
  double initial_chi2 = 0.0;
  double final_chi2 = 0.0;
  int iterations = 0;        // LM trials, accepted or not
  int accepted_steps = 0;
  bool converged = false;
  std::vector<double> chi2_history;  // initial value then one per accepted step
};

namespace detail {

/// Per-edge cost: r^T Omega r, or its Huber counterpart.
inline double robust_cost(double chi, const std::optional<double>& delta) {
  if (!delta) return chi;
  const double d = *delta, s = std::sqrt(std::max(chi, 0.0));
  return s <= d ? chi : 2.0 * d * s - d * d;
}
inline double robust_weight(double chi, const std::optional<double>& delta) {
  if (!delta) return 1.0;
  const double s = std::sqrt(std::max(chi, 0.0));
  return s <= *delta ? 1.0 : *delta / s;
}

}  // namespace detail

inline double graph_chi2(const PoseGraph& g, const std::vector<PoseSE3>& poses,
                         const std::optional<double>& huber = std::nullopt) {
  double total = 0.0;
  for (const auto& e : g.edges()) {
    const Twist r = edge_residual(e, poses);
    total += detail::robust_cost(r.dot(e.information * r), huber);
  }
  return total;
}
inline double graph_chi2(const PoseGraph& g) { return graph_chi2(g, g.poses()); }

/// Levenberg-Marquardt over left-multiplicative twists of every node except
/// the fixed one, on sparse normal equations. Throws when the graph is not
/// connected through the fixed node or a residual leaves the log domain.
inline OptimizeReport optimize(PoseGraph& graph, const OptimizeOptions& options = {}) {
  options.validate();
  for (const auto& e : graph.edges()) validate_information(e.information);
  if (!graph.is_connected()) throw InvalidArgument("optimize: graph is not connected through the fixed node");

  const int n = graph.size();
  const int fixed = graph.fixed_id();
  // Variable block index per node, -1 for the fixed node.
  std::vector<int> block(n, -1);
  int nv = 0;
  for (int i = 0; i < n; ++i) {
    if (i != fixed) block[i] = nv++;
  }

  std::vector<PoseSE3> poses = graph.poses();
  OptimizeReport rep;
  rep.initial_chi2 = graph_chi2(graph, poses, options.huber_delta);
  rep.final_chi2 = rep.initial_chi2;
  rep.chi2_history.push_back(rep.initial_chi2);
  if (nv == 0 || rep.initial_chi2 == 0.0) {
    rep.converged = true;
    return rep;
  }

  const int dim = 6 * nv;
  double mu = options.damping_init;
  double chi2 = rep.initial_chi2;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  bool pattern_ready = false;

  while (rep.iterations < options.max_iterations) {
    // Linearize at the current poses.
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(graph.edges().size() * 4 * 36 + dim);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(dim);
    auto put = [&](int bi, int bj, const Matrix6d& m) {
      for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < 6; ++c) trip.emplace_back(6 * bi + r, 6 * bj + c, m(r, c));
      }
    };
    for (const auto& e : graph.edges()) {
      const Twist r = edge_residual(e, poses);
      const double w = detail::robust_weight(r.dot(e.information * r), options.huber_delta);
      const Matrix6d omega = w * e.information;
      const Matrix6d jj = se3_right_jacobian_inverse(r) * adjoint(poses[e.to_id].inverse());
      const Matrix6d ji = -jj;
      const int bi = block[e.from_id], bj = block[e.to_id];
      if (bi >= 0) {
        const Matrix6d hii = ji.transpose() * omega * ji;
        put(bi, bi, hii);
        diag.segment<6>(6 * bi) += hii.diagonal();
        grad.segment<6>(6 * bi) += ji.transpose() * omega * r;
      }
      if (bj >= 0) {
        const Matrix6d hjj = jj.transpose() * omega * jj;
        put(bj, bj, hjj);
        diag.segment<6>(6 * bj) += hjj.diagonal();
        grad.segment<6>(6 * bj) += jj.transpose() * omega * r;
      }
      if (bi >= 0 && bj >= 0) {
        const Matrix6d hij = ji.transpose() * omega * jj;
        put(bi, bj, hij);
        put(bj, bi, hij.transpose());
      }
    }
    const double diag_scale = std::max(diag.maxCoeff(), 1.0);

    bool accepted = false;
    while (!accepted && rep.iterations < options.max_iterations) {
      std::vector<Eigen::Triplet<double>> t = trip;
      for (int k = 0; k < dim; ++k) t.emplace_back(k, k, mu * diag(k) + 1e-12 * diag_scale);
      Eigen::SparseMatrix<double> h(dim, dim);
      h.setFromTriplets(t.begin(), t.end());
      if (!pattern_ready) {
        solver.analyzePattern(h);
        pattern_ready = true;
      }
      solver.factorize(h);
      ++rep.iterations;
      if (solver.info() != Eigen::Success) {
        mu *= 10.0;
        if (mu > 1e16) return rep;
        continue;
      }
      const Eigen::VectorXd step = -solver.solve(grad);
      if (!step.allFinite()) throw InvalidArgument("optimize: non-finite step");
      if (step.norm() < options.tol) {
        rep.converged = true;
        return rep;
      }
      std::vector<PoseSE3> trial = poses;
      for (int i = 0; i < n; ++i) {
        if (block[i] >= 0) trial[i] = se3_exp(step.segment<6>(6 * block[i])) * poses[i];
      }
      double trial_chi2;
      try {
        trial_chi2 = graph_chi2(graph, trial, options.huber_delta);
      } catch (const DomainError&) {
        trial_chi2 = std::numeric_limits<double>::infinity();
      }
      if (trial_chi2 < chi2) {
        poses = std::move(trial);
        chi2 = trial_chi2;
        rep.chi2_history.push_back(chi2);
        ++rep.accepted_steps;
        mu = std::max(mu * 0.1, 1e-12);
        accepted = true;
        graph.set_poses(poses);
        rep.final_chi2 = chi2;
        if (chi2 == 0.0) {
          rep.converged = true;
          return rep;
        }
      } else {
        mu *= 10.0;
        if (mu > 1e16) {
          // No descent possible at machine precision: a local minimum.
          rep.converged = true;
          return rep;
        }
      }
    }
  }
  return rep;
}

/// Information for an edge from per-axis standard deviations.
inline Matrix6d information_from_sigmas(double sigma_rot, double sigma_trans) {
  if (!(sigma_rot > 0.0) || !(sigma_trans > 0.0)) throw InvalidArgument("information: sigmas must be positive");
  Matrix6d info = Matrix6d::Zero();
  info.diagonal().head<3>().setConstant(1.0 / (sigma_rot * sigma_rot));
  info.diagonal().tail<3>().setConstant(1.0 / (sigma_trans * sigma_trans));
  return info;
}

}  // namespace tslam
