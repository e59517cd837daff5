#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tslam/core/error.hpp"
#include "tslam/io/config.hpp"

namespace tslam {

struct CloudPoint {
  Eigen::Vector3d position;
  double intensity = 0.0;
};

/// ASCII PLY with float x y z intensity.
inline void write_ply(std::ostream& os, const std::vector<CloudPoint>& pts) {
  os << "ply\nformat ascii 1.0\nelement vertex " << pts.size()
     << "\nproperty float x\nproperty float y\nproperty float z\nproperty float intensity\nend_header\n";
  for (const auto& p : pts) {
    os << format_float(static_cast<float>(p.position.x())) << ' ' << format_float(static_cast<float>(p.position.y()))
       << ' ' << format_float(static_cast<float>(p.position.z())) << ' '
       << format_float(static_cast<float>(p.intensity)) << '\n';
  }
}

inline void write_ply_file(const std::string& path, const std::vector<CloudPoint>& pts) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot open '" + path + "' for writing");
  write_ply(os, pts);
  if (!os) throw InvalidArgument("failed writing '" + path + "'");
}

struct PlyContents {
  std::size_t header_count = 0;
  std::vector<CloudPoint> points;
};

/// Reads what write_ply produces; the body is parsed independently of the
/// header count so the two can be compared.
inline PlyContents read_ply(std::istream& is, const std::string& name = "<ply>") {
  std::string line;
  if (!std::getline(is, line) || trim(line) != "ply") throw InvalidArgument(name + ": not a PLY file");
  PlyContents out;
  bool have_count = false;
  while (std::getline(is, line)) {
    const std::string t = trim(line);
    if (t == "end_header") break;
    std::istringstream ls(t);
    std::string a, b;
    ls >> a >> b;
    if (a == "format" && b != "ascii") throw InvalidArgument(name + ": only ASCII PLY is supported");
    if (a == "element" && b == "vertex") {
      ls >> out.header_count;
      have_count = true;
    }
  }
  if (!have_count) throw InvalidArgument(name + ": missing vertex element");
  while (std::getline(is, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    std::istringstream ls(t);
    CloudPoint p;
    if (!(ls >> p.position.x() >> p.position.y() >> p.position.z() >> p.intensity)) {
      throw InvalidArgument(name + ": malformed vertex line");
    }
    out.points.push_back(p);
  }
  return out;
}

inline PlyContents read_ply_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open '" + path + "'");
  return read_ply(is, path);
}

}  // namespace tslam
