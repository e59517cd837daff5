#pragma once

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tslam/core/error.hpp"
#include "tslam/graph/pose_graph.hpp"

namespace tslam {

// g2o orders the 6-dof block as (translation, rotation); internal twists are
// (rotation, translation). Information is permuted on the way in and out.

namespace detail {

inline Matrix6d swap_halves(const Matrix6d& m) {
  Matrix6d p = Matrix6d::Zero();
  p.topRightCorner<3, 3>().setIdentity();
  p.bottomLeftCorner<3, 3>().setIdentity();
  return p * m * p.transpose();
}

inline void write_pose(std::ostream& os, const PoseSE3& p) {
  const Eigen::Quaterniond q = p.quaternion();
  const Eigen::Vector3d& t = p.translation();
  os << t.x() << ' ' << t.y() << ' ' << t.z() << ' ' << q.x() << ' ' << q.y() << ' ' << q.z() << ' ' << q.w();
}

}  // namespace detail

/// VERTEX_SE3:QUAT / EDGE_SE3:QUAT records with upper-triangular information
/// and a FIX line for the gauge node.
inline void write_g2o(std::ostream& os, const PoseGraph& g) {
  os << std::setprecision(17);
  for (const auto& n : g.nodes()) {
    os << "VERTEX_SE3:QUAT " << n.id << ' ';
    detail::write_pose(os, n.global_pose);
    os << '\n';
  }
  os << "FIX " << g.fixed_id() << '\n';
  for (const auto& e : g.edges()) {
    os << "EDGE_SE3:QUAT " << e.from_id << ' ' << e.to_id << ' ';
    detail::write_pose(os, e.relative);
    const Matrix6d info = detail::swap_halves(e.information);
    for (int r = 0; r < 6; ++r) {
      for (int c = r; c < 6; ++c) os << ' ' << info(r, c);
    }
    os << '\n';
  }
}

inline void write_g2o_file(const std::string& path, const PoseGraph& g) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot open '" + path + "' for writing");
  write_g2o(os, g);
  if (!os) throw InvalidArgument("failed writing '" + path + "'");
}

/// Parses the format written by write_g2o (plain VERTEX_SE3 / EDGE_SE3 tags
/// are accepted as aliases). Vertex ids must be dense from 0. An edge whose
/// endpoints are consecutive ids is read as odometry, any other as a loop.
inline PoseGraph read_g2o(std::istream& is, const std::string& name = "<g2o>") {
  std::vector<std::pair<int, PoseSE3>> vertices;
  struct RawEdge {
    int from, to;
    PoseSE3 rel;
    Matrix6d info;
    int line;
  };
  std::vector<RawEdge> edges;
  int fixed = 0;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& why) {
    throw InvalidArgument(name + ":" + std::to_string(lineno) + ": " + why);
  };
  auto read_pose = [&](std::istringstream& ls) {
    double x, y, z, qx, qy, qz, qw;
    if (!(ls >> x >> y >> z >> qx >> qy >> qz >> qw)) fail("malformed pose");
    const Eigen::Quaterniond q(qw, qx, qy, qz);
    if (!(q.norm() > 0.0)) fail("zero quaternion");
    return PoseSE3::from_quaternion(q.normalized(), {x, y, z});
  };
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "VERTEX_SE3:QUAT" || tag == "VERTEX_SE3") {
      int id;
      if (!(ls >> id)) fail("malformed vertex id");
      vertices.emplace_back(id, read_pose(ls));
    } else if (tag == "EDGE_SE3:QUAT" || tag == "EDGE_SE3") {
      RawEdge e{};
      if (!(ls >> e.from >> e.to)) fail("malformed edge ids");
      e.rel = read_pose(ls);
      Matrix6d info;
      for (int r = 0; r < 6; ++r) {
        for (int c = r; c < 6; ++c) {
          if (!(ls >> info(r, c))) fail("malformed information");
          info(c, r) = info(r, c);
        }
      }
      e.info = detail::swap_halves(info);
      e.line = lineno;
      edges.push_back(e);
    } else if (tag == "FIX") {
      if (!(ls >> fixed)) fail("malformed FIX");
    } else {
      fail("unknown record '" + tag + "'");
    }
  }
  if (vertices.empty()) throw InvalidArgument(name + ": no vertices");
  std::sort(vertices.begin(), vertices.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    if (vertices[i].first != static_cast<int>(i)) throw InvalidArgument(name + ": vertex ids must be dense from 0");
  }
  PoseGraph g(vertices[0].second);
  for (std::size_t i = 1; i < vertices.size(); ++i) g.add_node(vertices[i].second);
  for (const auto& e : edges) {
    lineno = e.line;
    try {
      g.add_edge({e.from, e.to, e.rel, e.info, e.to == e.from + 1 ? EdgeKind::Odometry : EdgeKind::Loop});
    } catch (const InvalidArgument& ex) {
      fail(ex.what());
    }
  }
  g.set_fixed_id(fixed);
  return g;
}

inline PoseGraph read_g2o_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open '" + path + "'");
  return read_g2o(is, path);
}

}  // namespace tslam
