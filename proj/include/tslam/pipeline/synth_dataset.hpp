#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "tslam/core/error.hpp"
#include "tslam/eval/trajectory.hpp"
#include "tslam/io/manifest.hpp"
#include "tslam/io/pgm.hpp"
#include "tslam/loop/loop_closure.hpp"
#include "tslam/synth/sequence.hpp"

namespace tslam {

struct SynthDatasetSpec {
  SceneSpec scene;
  TrajectorySpec trajectory;
  Intrinsics intrinsics = Intrinsics::centered(160, 120);
  double frame_rate = 10.0;  // Hz
  bool write_features = false;  // baseline embeddings of the rendered images
  /// Written into the manifest; unset leaves the decision to the run config.
  std::optional<ManifestEnhance> enhance;
};

struct SynthDatasetInfo {
  std::filesystem::path manifest;
  SyntheticSequence sequence;
};

inline std::string frame_file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu.pgm", i);
  return buf;
}

/// Renders the sequence and writes images/, depth/, groundtruth.txt,
/// odometry.txt (chained noisy odometry) and manifest.txt under dir.
inline SynthDatasetInfo write_synthetic_dataset(const std::filesystem::path& dir, const SynthDatasetSpec& spec) {
  if (!(spec.frame_rate > 0.0)) throw InvalidArgument("synth: frame_rate must be positive");
  spec.intrinsics.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir / "images", ec);
  if (!ec) std::filesystem::create_directories(dir / "depth", ec);
  if (ec) throw InvalidArgument("cannot create dataset directory '" + dir.string() + "': " + ec.message());

  SynthDatasetInfo info;
  info.sequence = generate_sequence(spec.scene, spec.trajectory, spec.intrinsics);
  const auto& seq = info.sequence;

  DatasetManifest m;
  m.path = dir / "manifest.txt";
  m.intrinsics = spec.intrinsics;
  m.enhance = spec.enhance;
  m.groundtruth = "groundtruth.txt";
  std::vector<double> stamps;
  std::vector<FeatureVec> feats;
  for (std::size_t i = 0; i < seq.images.size(); ++i) {
    const std::string name = frame_file_name(i);
    write_pgm16_file((dir / "images" / name).string(), quantize_image(seq.images[i]));
    write_depth_file((dir / "depth" / name).string(), seq.depths[i]);
    stamps.push_back(static_cast<double>(i) / spec.frame_rate);
    m.frames.push_back({stamps.back(), "images/" + name, "depth/" + name});
    if (spec.write_features) feats.push_back(embed_baseline(seq.images[i]));
  }
  write_tum_file((dir / "groundtruth.txt").string(), Trajectory::from_poses(stamps, seq.true_poses));
  write_tum_file((dir / "odometry.txt").string(),
                 Trajectory::from_poses(stamps, chain_poses(seq.noisy_odometry, seq.true_poses.front())));
  if (spec.write_features) {
    m.features = "features.txt";
    std::ofstream os(dir / "features.txt");
    if (!os) throw InvalidArgument("cannot write features file");
    write_features(os, feats);
  }
  std::ofstream os(m.path);
  if (!os) throw InvalidArgument("cannot write '" + m.path.string() + "'");
  write_manifest(os, m);
  info.manifest = m.path;
  return info;
}

}  // namespace tslam
