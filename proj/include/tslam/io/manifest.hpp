#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tslam/core/error.hpp"
#include "tslam/enhance/thermal_enhance.hpp"
#include "tslam/geometry/camera.hpp"
#include "tslam/io/config.hpp"
#include "tslam/loop/loop_closure.hpp"

namespace tslam {

struct ManifestEnhance {
  bool enabled = true;
  EnhanceParams params;
};

struct FrameRecord {
  double timestamp = 0.0;
  std::string image;                 // relative to the manifest directory
  std::optional<std::string> depth;  // '-' in the file when absent
};

/// Dataset description. Text lines:
///   intrinsics fx fy cx cy width height
///   enhance clip_lo clip_hi sigma detail_gain out_lo out_hi | enhance off
///   features <file>        one embedding per frame, optional
///   groundtruth <file>     TUM trajectory, optional
///   frame <timestamp> <image> <depth|->
struct DatasetManifest {
  std::filesystem::path path;  // the manifest file itself
  Intrinsics intrinsics;
  std::optional<ManifestEnhance> enhance;  // unset: the run configuration decides
  std::optional<std::string> features;
  std::optional<std::string> groundtruth;
  std::vector<FrameRecord> frames;

  std::filesystem::path root() const { return path.parent_path(); }
  std::filesystem::path resolve(const std::string& rel) const {
    const std::filesystem::path p(rel);
    return p.is_absolute() ? p : root() / p;
  }
};

inline void write_manifest(std::ostream& os, const DatasetManifest& m) {
  const Intrinsics& k = m.intrinsics;
  os << "# tslam dataset manifest\n";
  os << "intrinsics " << format_double(k.fx) << ' ' << format_double(k.fy) << ' ' << format_double(k.cx) << ' '
     << format_double(k.cy) << ' ' << k.width << ' ' << k.height << '\n';
  if (m.enhance) {
    if (m.enhance->enabled) {
      const EnhanceParams& e = m.enhance->params;
      os << "enhance " << format_double(e.clip_lo) << ' ' << format_double(e.clip_hi) << ' ' << format_double(e.sigma)
         << ' ' << format_double(e.detail_gain) << ' ' << format_double(e.out_lo) << ' ' << format_double(e.out_hi)
         << '\n';
    } else {
      os << "enhance off\n";
    }
  }
  if (m.features) os << "features " << *m.features << '\n';
  if (m.groundtruth) os << "groundtruth " << *m.groundtruth << '\n';
  for (const auto& f : m.frames) {
    os << "frame " << std::fixed << std::setprecision(6) << f.timestamp << ' ' << f.image << ' '
       << (f.depth ? *f.depth : "-") << '\n';
  }
}

/// Parses and validates: intrinsics present, timestamps strictly increasing,
/// every referenced file exists.
inline DatasetManifest read_manifest_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open manifest '" + path + "'");
  DatasetManifest m;
  m.path = std::filesystem::path(path);
  bool have_k = false;
  std::string raw;
  int lineno = 0;
  auto fail = [&](const std::string& why) -> void {
    throw InvalidArgument(path + ":" + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(is, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    std::vector<std::string> f;
    for (std::string t; ls >> t;) f.push_back(t);
    try {
      if (tag == "intrinsics") {
        if (f.size() != 6) fail("intrinsics needs fx fy cx cy width height");
        m.intrinsics = {parse_double(f[0], "fx"), parse_double(f[1], "fy"), parse_double(f[2], "cx"),
                        parse_double(f[3], "cy"), static_cast<int>(parse_int(f[4], "width")),
                        static_cast<int>(parse_int(f[5], "height"))};
        m.intrinsics.validate();
        have_k = true;
      } else if (tag == "enhance") {
        if (f.size() == 1 && f[0] == "off") {
          m.enhance = ManifestEnhance{false, {}};
        } else {
          if (f.size() != 6) fail("enhance needs 6 values or 'off'");
          EnhanceParams e{parse_double(f[0], "clip_lo"), parse_double(f[1], "clip_hi"), parse_double(f[2], "sigma"),
                          parse_double(f[3], "detail_gain"), parse_double(f[4], "out_lo"),
                          parse_double(f[5], "out_hi")};
          e.validate();
          m.enhance = ManifestEnhance{true, e};
        }
      } else if (tag == "features" || tag == "groundtruth") {
        if (f.size() != 1) fail(tag + " needs one path");
        (tag == "features" ? m.features : m.groundtruth) = f[0];
      } else if (tag == "frame") {
        if (f.size() != 3) fail("frame needs <timestamp> <image> <depth|->");
        FrameRecord r{parse_double(f[0], "timestamp"), f[1], std::nullopt};
        if (f[2] != "-") r.depth = f[2];
        if (!std::isfinite(r.timestamp)) fail("non-finite timestamp");
        if (!m.frames.empty() && !(r.timestamp > m.frames.back().timestamp)) fail("timestamps must be strictly increasing");
        m.frames.push_back(std::move(r));
      } else {
        fail("unknown record '" + tag + "'");
      }
    } catch (const InvalidArgument& e) {
      const std::string what = e.what();
      if (what.rfind(path + ":", 0) == 0) throw;
      fail(what);
    }
  }
  if (!have_k) throw InvalidArgument(path + ": missing intrinsics line");
  auto require_file = [&](const std::string& rel) {
    if (!std::filesystem::is_regular_file(m.resolve(rel))) {
      throw InvalidArgument(path + ": referenced file '" + rel + "' does not exist");
    }
  };
  for (const auto& fr : m.frames) {
    require_file(fr.image);
    if (fr.depth) require_file(*fr.depth);
  }
  if (m.features) require_file(*m.features);
  if (m.groundtruth) require_file(*m.groundtruth);
  return m;
}

struct FeatureLoad {
  std::vector<FeatureVec> features;
  std::vector<std::string> warnings;
};

/// One embedding per line. Vectors are normalized; a stored norm off by more
/// than 1e-3 from 1 produces a warning.
inline FeatureLoad read_features_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open features '" + path + "'");
  FeatureLoad out;
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> vals;
    for (std::string t; ls >> t;) vals.push_back(parse_double(t, path + ":" + std::to_string(lineno)));
    const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    if (!out.features.empty() && v.size() != out.features.front().size()) {
      throw InvalidArgument(path + ":" + std::to_string(lineno) + ": feature length differs from the first line");
    }
    try {
      out.features.push_back(FeatureVec::normalized(v));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (std::abs(v.norm() - 1.0) > 1e-3) {
      out.warnings.push_back(path + ":" + std::to_string(lineno) + ": feature norm " + format_double(v.norm()) +
                             " renormalized");
    }
  }
  return out;
}

inline void write_features(std::ostream& os, const std::vector<FeatureVec>& feats) {
  for (const auto& f : feats) {
    for (Eigen::Index i = 0; i < f.size(); ++i) os << (i ? " " : "") << format_double(f[i]);
    os << '\n';
  }
}

}  // namespace tslam
