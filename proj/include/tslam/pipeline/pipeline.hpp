#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tslam/core/error.hpp"
#include "tslam/core/random.hpp"
#include "tslam/enhance/thermal_enhance.hpp"
#include "tslam/eval/trajectory.hpp"
#include "tslam/geometry/warp.hpp"
#include "tslam/graph/g2o_io.hpp"
#include "tslam/graph/pose_graph.hpp"
#include "tslam/io/manifest.hpp"
#include "tslam/io/pgm.hpp"
#include "tslam/io/ply.hpp"
#include "tslam/loop/loop_closure.hpp"
#include "tslam/odometry/direct_odometry.hpp"
#include "tslam/pipeline/config.hpp"

namespace tslam {

/// Progress and warning sink. A null stream discards messages.
struct RunLog {
  std::ostream* os = nullptr;
  bool verbose = false;

  void info(const std::string& msg) const {
    if (os && verbose) *os << msg << '\n';
  }
  void warn(const std::string& msg) const {
    if (os) *os << "warning: " << msg << '\n';
  }
};

struct LoadedFrame {
  ImageGray image;  // after optional enhancement
  DepthMap depth;
};

/// Enhancement settings in effect: the manifest's enhance line wins over the
/// configuration.
inline std::optional<EnhanceParams> effective_enhancement(const DatasetManifest& m, const PipelineConfig& c) {
  if (m.enhance) return m.enhance->enabled ? std::optional<EnhanceParams>(m.enhance->params) : std::nullopt;
  return c.pipeline.enhance_enabled ? std::optional<EnhanceParams>(c.enhance) : std::nullopt;
}

inline ImageGray preprocess_image(const RawThermal& raw, const std::optional<EnhanceParams>& params) {
  return params ? enhance(raw, *params) : counts_to_unit(raw);
}

inline LoadedFrame load_frame(const DatasetManifest& m, std::size_t index, const std::optional<EnhanceParams>& params) {
  const FrameRecord& r = m.frames.at(index);
  if (!r.depth) {
    throw InvalidArgument(m.path.string() + ": frame " + std::to_string(index) + " has no depth file");
  }
  LoadedFrame f;
  f.image = preprocess_image(read_pgm_file(m.resolve(r.image).string()), params);
  f.depth = read_depth_file(m.resolve(*r.depth).string());
  const Intrinsics& k = m.intrinsics;
  require_intrinsics_shape(k, f.image.width(), f.image.height(), ("frame " + std::to_string(index) + " image").c_str());
  require_intrinsics_shape(k, f.depth.width(), f.depth.height(), ("frame " + std::to_string(index) + " depth").c_str());
  return f;
}

struct FrameDiagnostics {
  int index = 0;
  double timestamp = 0.0;
  double loss = 0.0;
  int iterations = 0;
  bool converged = false;
  double valid_fraction = 0.0;
  bool degenerate = false;
};

struct LoopRecord {
  LoopCandidate candidate;
  bool accepted = false;
  double loss = 0.0;
  std::string note;
};

struct PipelineResult {
  std::vector<double> timestamps;
  std::vector<PoseSE3> poses_before;
  std::vector<PoseSE3> poses_after;
  std::vector<FrameDiagnostics> frames;
  std::vector<LoopRecord> loops;
  OptimizeReport graph_report;
  PoseGraph graph;
  std::vector<std::string> warnings;
  // Against the manifest's ground truth, when present.
  std::optional<TrajectoryEvalReport> eval_before, eval_after;
  std::optional<double> ate_unaligned_before, ate_unaligned_after;
  std::string alignment_note;
};

namespace detail {

inline void evaluate_against_groundtruth(const DatasetManifest& m, const PipelineConfig& c, PipelineResult& r,
                                         const RunLog& log) {
  if (!m.groundtruth) return;
  const Trajectory gt = read_tum_file(m.resolve(*m.groundtruth).string());
  TrajectoryEvalOptions opt;
  opt.alignment = c.eval.alignment;
  opt.max_time_difference = c.eval.max_time_difference;
  opt.rpe_delta = c.eval.rpe_delta;
  const Trajectory before = Trajectory::from_poses(r.timestamps, r.poses_before);
  const Trajectory after = Trajectory::from_poses(r.timestamps, r.poses_after);
  const Association ab = associate(before, gt, opt.max_time_difference);
  const Association aa = associate(after, gt, opt.max_time_difference);
  if (ab.estimate.empty()) {
    log.warn("ground truth shares no timestamps with the sequence; skipping evaluation");
    return;
  }
  r.ate_unaligned_before = ate_rmse(ab.estimate, ab.reference);
  r.ate_unaligned_after = ate_rmse(aa.estimate, aa.reference);
  try {
    r.eval_before = evaluate_trajectory(before, gt, opt);
    r.eval_after = evaluate_trajectory(after, gt, opt);
  } catch (const DomainError& e) {
    r.alignment_note = e.what();
  }
}

}  // namespace detail

/// Sequential odometry, loop detection and pose-graph optimization over a
/// manifest. Every frame needs depth. Nothing is written to disk.
inline PipelineResult run_pipeline(const DatasetManifest& m, const PipelineConfig& c, const RunLog& log = {}) {
  c.validate();
  if (m.frames.empty()) throw InvalidArgument(m.path.string() + ": manifest lists no frames");
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    if (!m.frames[i].depth) {
      throw InvalidArgument(m.path.string() + ": frame " + std::to_string(i) + " has no depth; odometry requires depth");
    }
  }
  const auto enh = effective_enhancement(m, c);
  const Intrinsics& k = m.intrinsics;

  std::vector<FeatureVec> file_features;
  if (c.pipeline.loops_enabled && c.pipeline.features == FeatureSource::File) {
    if (!m.features) throw InvalidArgument(m.path.string() + ": loop.features = file but the manifest has no features");
    FeatureLoad fl = read_features_file(m.resolve(*m.features).string());
    for (auto& w : fl.warnings) log.warn(w);
    if (fl.features.size() != m.frames.size()) {
      throw InvalidArgument(m.path.string() + ": features file has " + std::to_string(fl.features.size()) +
                            " vectors for " + std::to_string(m.frames.size()) + " frames");
    }
    file_features = std::move(fl.features);
  }

  PipelineResult r;
  for (const auto& f : m.frames) r.timestamps.push_back(f.timestamp);

  // Anchor the first node at the ground-truth pose when one is available.
  PoseSE3 origin;
  if (m.groundtruth) {
    const Trajectory gt = read_tum_file(m.resolve(*m.groundtruth).string());
    const Association a =
        associate(Trajectory::from_poses({r.timestamps.front()}, {PoseSE3{}}), gt, c.eval.max_time_difference);
    if (!a.reference.empty()) origin = a.reference.front();
  }
  PoseGraph graph(origin);
  LoopDetector detector(c.loop);
  Rng noise(mix64(c.seed ^ 0x6e6f697365ULL));
  const Matrix6d base_info =
      c.graph.odometry_sigma_rot_deg > 0.0
          ? information_from_sigmas(deg2rad(c.graph.odometry_sigma_rot_deg), c.graph.odometry_sigma_trans)
          : Matrix6d::Identity().eval();
  const Matrix6d odo_info = c.graph.odometry_info_scale * base_info;
  const Matrix6d loop_info = c.graph.loop_info_scale * base_info;

  LoadedFrame prev = load_frame(m, 0, enh);
  r.frames.push_back({0, m.frames[0].timestamp, 0.0, 0, true, 1.0, false});
  PoseSE3 velocity;  // last relative estimate

  auto offer_keyframe = [&](int index, const LoadedFrame& frame) {
    if (!c.pipeline.loops_enabled || !LoopDetector::is_keyframe(index, c.loop)) return;
    const FeatureVec f = c.pipeline.features == FeatureSource::File ? file_features[index] : embed_baseline(frame.image);
    const auto cand = detector.add_frame(index, f);
    if (!cand) return;
    LoopRecord rec{*cand, false, 0.0, ""};
    const LoadedFrame match = load_frame(m, static_cast<std::size_t>(cand->match_frame), enh);
    const PoseSE3 init = graph.pose(cand->match_frame).inverse() * graph.pose(index);
    try {
      const OdometryResult est =
          estimate_relative_pose(frame.image, match.image, frame.depth, match.depth, k, c.odometry, init, c.loss);
      graph.add_edge({cand->match_frame, index, est.pose, loop_info, EdgeKind::Loop});
      rec.accepted = true;
      rec.loss = est.final_loss;
      log.info("loop " + std::to_string(index) + " -> " + std::to_string(cand->match_frame) + " similarity " +
               format_double(cand->similarity));
    } catch (const DegenerateOverlap& e) {
      rec.note = "degenerate overlap";
      const std::string msg = "loop candidate " + std::to_string(index) + " -> " + std::to_string(cand->match_frame) +
                              " rejected: " + e.what();
      r.warnings.push_back(msg);
      log.warn(msg);
    }
    r.loops.push_back(rec);
  };
  offer_keyframe(0, prev);

  for (std::size_t i = 1; i < m.frames.size(); ++i) {
    LoadedFrame cur = load_frame(m, i, enh);
    FrameDiagnostics d{static_cast<int>(i), m.frames[i].timestamp, 0.0, 0, false, 0.0, false};
    PoseSE3 rel;
    Matrix6d info = odo_info;
    try {
      const PoseSE3 init = c.pipeline.constant_velocity ? velocity : PoseSE3{};
      const OdometryResult est =
          estimate_relative_pose(cur.image, prev.image, cur.depth, prev.depth, k, c.odometry, init, c.loss);
      rel = est.pose;
      velocity = est.pose;
      d.loss = est.final_loss;
      d.iterations = est.iterations_used;
      d.converged = est.converged;
      d.valid_fraction = est.valid_fraction;
    } catch (const DegenerateOverlap& e) {
      d.degenerate = true;
      d.valid_fraction = e.valid_fraction();
      info = 1e-6 * odo_info;
      velocity = PoseSE3{};
      const std::string msg = "frame " + std::to_string(i) + ": " + e.what() + "; identity edge inserted";
      r.warnings.push_back(msg);
      log.warn(msg);
    }
    if (c.pipeline.inject_noise_rot_deg > 0.0 || c.pipeline.inject_noise_trans_frac > 0.0) {
      const double sr = deg2rad(c.pipeline.inject_noise_rot_deg);
      const double st = c.pipeline.inject_noise_trans_frac * rel.translation().norm();
      Twist xi;
      for (int a = 0; a < 3; ++a) xi(a) = noise.normal(0.0, sr);
      for (int a = 3; a < 6; ++a) xi(a) = noise.normal(0.0, st);
      rel = rel * se3_exp(xi);
    }
    append_odometry(graph, rel, info);
    r.frames.push_back(d);
    log.info("frame " + std::to_string(i) + " loss " + format_double(d.loss) + " iterations " +
             std::to_string(d.iterations));
    offer_keyframe(static_cast<int>(i), cur);
    prev = std::move(cur);
  }

  r.poses_before = graph.poses();
  OptimizeOptions oo;
  oo.max_iterations = c.graph.max_iterations;
  oo.tol = c.graph.tol;
  if (c.graph.huber_delta > 0.0) oo.huber_delta = c.graph.huber_delta;
  r.graph_report = optimize(graph, oo);
  r.poses_after = graph.poses();
  r.graph = std::move(graph);
  detail::evaluate_against_groundtruth(m, c, r, log);
  return r;
}

/// Loop candidates over a manifest without odometry: baseline embeddings of
/// the preprocessed keyframe images, or the manifest's feature file.
inline std::vector<LoopCandidate> detect_manifest_loops(const DatasetManifest& m, const PipelineConfig& c,
                                                        const RunLog& log = {}) {
  c.validate();
  LoopDetector det(c.loop);
  std::vector<LoopCandidate> out;
  std::vector<FeatureVec> file_features;
  if (c.pipeline.features == FeatureSource::File) {
    if (!m.features) throw InvalidArgument(m.path.string() + ": loop.features = file but the manifest has no features");
    FeatureLoad fl = read_features_file(m.resolve(*m.features).string());
    for (auto& w : fl.warnings) log.warn(w);
    if (fl.features.size() != m.frames.size()) throw InvalidArgument(m.path.string() + ": feature count mismatch");
    file_features = std::move(fl.features);
  }
  const auto enh = effective_enhancement(m, c);
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    if (!LoopDetector::is_keyframe(static_cast<int>(i), c.loop)) continue;
    const FeatureVec f = file_features.empty()
                             ? embed_baseline(preprocess_image(read_pgm_file(m.resolve(m.frames[i].image).string()), enh))
                             : file_features[i];
    if (auto cand = det.add_frame(static_cast<int>(i), f)) out.push_back(*cand);
  }
  return out;
}

/// Backprojects every stride-th frame's valid depth through the given poses.
inline std::vector<CloudPoint> build_cloud(const DatasetManifest& m, const PipelineConfig& c,
                                           const std::vector<PoseSE3>& poses, int stride) {
  if (stride < 1) throw InvalidArgument("cloud: stride must be >= 1");
  if (poses.size() != m.frames.size()) throw ShapeError("cloud: pose count does not match frame count");
  const auto enh = effective_enhancement(m, c);
  std::vector<CloudPoint> pts;
  for (std::size_t i = 0; i < m.frames.size(); i += static_cast<std::size_t>(stride)) {
    const LoadedFrame f = load_frame(m, i, enh);
    for (int y = 0; y < f.depth.height(); ++y) {
      for (int x = 0; x < f.depth.width(); ++x) {
        if (!f.depth.is_valid(x, y)) continue;
        const Eigen::Vector3d pc = f.depth.depth(x, y) * m.intrinsics.unproject({double(x), double(y)});
        pts.push_back({poses[i] * pc, f.image(x, y)});
      }
    }
  }
  return pts;
}

namespace run_files {
inline constexpr const char* kConfig = "config.txt";
inline constexpr const char* kManifest = "manifest.txt";
inline constexpr const char* kBefore = "trajectory_before.txt";
inline constexpr const char* kAfter = "trajectory_after.txt";
inline constexpr const char* kLoops = "loops.txt";
inline constexpr const char* kDiagnostics = "diagnostics.txt";
inline constexpr const char* kGraph = "graph.g2o";
inline constexpr const char* kCloud = "cloud.ply";
inline constexpr const char* kReport = "report.txt";
}  // namespace run_files

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw InvalidArgument("cannot open '" + p.string() + "' for writing");
  return os;
}

inline std::string fmt(double v) { return format_double(v); }

}  // namespace detail

/// Writes the run directory. Contents depend only on the inputs, so repeated
/// runs produce identical files.
inline void write_run_directory(const std::filesystem::path& dir, const DatasetManifest& m, const PipelineConfig& c,
                                const PipelineResult& r) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InvalidArgument("cannot create run directory '" + dir.string() + "': " + ec.message());
  {
    auto os = detail::open_output(dir / run_files::kConfig);
    write_config(os, c);
  }
  {
    auto os = detail::open_output(dir / run_files::kManifest);
    os << std::filesystem::absolute(m.path).lexically_normal().string() << '\n';
  }
  write_tum_file((dir / run_files::kBefore).string(), Trajectory::from_poses(r.timestamps, r.poses_before));
  write_tum_file((dir / run_files::kAfter).string(), Trajectory::from_poses(r.timestamps, r.poses_after));
  {
    auto os = detail::open_output(dir / run_files::kLoops);
    os << "# query_frame match_frame similarity status loss\n";
    for (const auto& l : r.loops) {
      os << l.candidate.query_frame << ' ' << l.candidate.match_frame << ' ' << detail::fmt(l.candidate.similarity)
         << ' ' << (l.accepted ? "accepted" : "rejected") << ' ' << detail::fmt(l.loss) << '\n';
    }
  }
  {
    auto os = detail::open_output(dir / run_files::kDiagnostics);
    os << "# frame timestamp loss iterations converged valid_fraction degenerate\n";
    for (const auto& d : r.frames) {
      os << d.index << ' ' << std::fixed << std::setprecision(6) << d.timestamp << std::defaultfloat << ' '
         << detail::fmt(d.loss) << ' ' << d.iterations << ' ' << d.converged << ' ' << detail::fmt(d.valid_fraction)
         << ' ' << d.degenerate << '\n';
    }
  }
  write_g2o_file((dir / run_files::kGraph).string(), r.graph);
  write_ply_file((dir / run_files::kCloud).string(), build_cloud(m, c, r.poses_after, c.pipeline.cloud_stride));
  {
    auto os = detail::open_output(dir / run_files::kReport);
    std::size_t accepted = 0;
    for (const auto& l : r.loops) accepted += l.accepted;
    os << "frames = " << r.frames.size() << '\n';
    os << "loop_candidates = " << r.loops.size() << '\n';
    os << "loop_edges = " << accepted << '\n';
    os << "warnings = " << r.warnings.size() << '\n';
    for (std::size_t i = 0; i < r.warnings.size(); ++i) os << "warning." << i << " = " << r.warnings[i] << '\n';
    os << "graph.initial_chi2 = " << detail::fmt(r.graph_report.initial_chi2) << '\n';
    os << "graph.final_chi2 = " << detail::fmt(r.graph_report.final_chi2) << '\n';
    os << "graph.iterations = " << r.graph_report.iterations << '\n';
    os << "graph.converged = " << (r.graph_report.converged ? "true" : "false") << '\n';
    if (r.ate_unaligned_before) {
      os << "ate_unaligned_before = " << detail::fmt(*r.ate_unaligned_before) << '\n';
      os << "ate_unaligned_after = " << detail::fmt(*r.ate_unaligned_after) << '\n';
    }
    if (r.eval_before) {
      os << "alignment = " << to_string(r.eval_before->alignment) << '\n';
      os << "ate_before = " << detail::fmt(r.eval_before->ate_rmse) << '\n';
      os << "ate_after = " << detail::fmt(r.eval_after->ate_rmse) << '\n';
      os << "rpe_deg_before = " << detail::fmt(r.eval_before->rpe_deg) << '\n';
      os << "rpe_deg_after = " << detail::fmt(r.eval_after->rpe_deg) << '\n';
    } else if (!r.alignment_note.empty()) {
      os << "alignment = unavailable (" << r.alignment_note << ")\n";
    }
  }
}

/// Reconstructs the cloud of a finished run from its directory.
inline std::vector<CloudPoint> export_cloud(const std::filesystem::path& run_dir, int stride) {
  auto need = [&](const char* name) {
    const auto p = run_dir / name;
    if (!std::filesystem::is_regular_file(p)) {
      throw InvalidArgument("run directory '" + run_dir.string() + "' is missing " + name);
    }
    return p;
  };
  std::string manifest_path;
  {
    std::ifstream is(need(run_files::kManifest));
    std::getline(is, manifest_path);
  }
  const DatasetManifest m = read_manifest_file(manifest_path);
  const PipelineConfig c = load_config_file(need(run_files::kConfig).string());
  const Trajectory t = read_tum_file(need(run_files::kAfter).string());
  if (t.size() != m.frames.size()) throw InvalidArgument("run trajectory does not match the manifest frame count");
  return build_cloud(m, c, t.pose_list(), stride);
}

}  // namespace tslam
