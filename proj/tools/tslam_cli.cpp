// Command-line front end for the tslam toolkit.
//
// Exit codes: 0 success, 1 internal error, 2 bad input, 3 empty result.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tslam/tslam.hpp"

namespace fs = std::filesystem;
using namespace tslam;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool verbose = false;
};

PipelineConfig load_config(const GlobalOptions& g) {
  PipelineConfig c = g.config_path.empty() ? PipelineConfig{} : load_config_file(g.config_path);
  if (g.seed) c.seed = *g.seed;
  c.validate();
  return c;
}

std::string require_out(const GlobalOptions& g, const char* cmd) {
  if (g.out_dir.empty()) throw InvalidArgument(std::string(cmd) + ": --out <dir> is required");
  return g.out_dir;
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw InvalidArgument("cannot create directory '" + p.string() + "': " + ec.message());
}

std::ofstream open_file(const fs::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw InvalidArgument("cannot open '" + p.string() + "' for writing");
  return os;
}

/// Report to stdout, and to <out>/<name> when --out is given.
template <typename Writer>
void emit(const GlobalOptions& g, const char* name, Writer&& w) {
  w(std::cout);
  if (!g.out_dir.empty()) {
    ensure_dir(g.out_dir);
    auto os = open_file(fs::path(g.out_dir) / name);
    w(os);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thermal monocular SLAM toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config_path, "Config file (section.key = value)")->check(CLI::ExistingFile);
  app.add_option("--out", g.out_dir, "Output directory");
  app.add_option("--seed", g.seed, "Seed for every randomized step");
  app.add_option("--threads", g.threads, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
  app.add_flag("--verbose", g.verbose, "Progress messages on stderr");

  // enhance
  auto* enh = app.add_subcommand("enhance", "Enhance a raw 16-bit thermal PGM");
  std::string enh_in, enh_out;
  enh->add_option("--input", enh_in, "Raw PGM")->required()->check(CLI::ExistingFile);
  enh->add_option("--output", enh_out, "Enhanced 16-bit PGM")->required();

  // odometry
  auto* odo = app.add_subcommand("odometry", "Frame-to-frame odometry over a manifest");
  std::string odo_manifest;
  odo->add_option("--manifest", odo_manifest, "Dataset manifest")->required();

  // loops
  auto* lp = app.add_subcommand("loops", "Loop-closure candidates over a manifest");
  std::string lp_manifest;
  lp->add_option("--manifest", lp_manifest, "Dataset manifest")->required();

  // optimize
  auto* opt = app.add_subcommand("optimize", "Optimize a g2o pose graph");
  std::string opt_graph;
  opt->add_option("--graph", opt_graph, "Input graph (g2o)")->required();

  // run
  auto* run = app.add_subcommand("run", "Full pipeline over a manifest");
  std::string run_manifest;
  run->add_option("--manifest", run_manifest, "Dataset manifest")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Trajectory or depth metrics");
  std::string ev_est, ev_ref, ev_pred, ev_gt, ev_align;
  std::optional<double> ev_dt;
  std::optional<int> ev_delta;
  bool ev_no_median = false;
  ev->add_option("--estimate", ev_est, "Estimated trajectory (TUM)");
  ev->add_option("--reference", ev_ref, "Reference trajectory (TUM)");
  ev->add_option("--pred-depth", ev_pred, "Predicted depth PGM");
  ev->add_option("--gt-depth", ev_gt, "Ground-truth depth PGM");
  ev->add_option("--align", ev_align, "none | rigid | sim3 (default from config)");
  ev->add_option("--max-dt", ev_dt, "Association window in seconds");
  ev->add_option("--rpe-delta", ev_delta, "RPE frame delta");
  ev->add_flag("--no-median-scale", ev_no_median, "Disable median scaling of predicted depth");

  // synth
  auto* sy = app.add_subcommand("synth", "Write a synthetic dataset");
  std::string sy_shape = "straight", sy_enhance = "config", sy_model = "heightfield";
  int sy_steps = 40, sy_width = 160, sy_height = 120;
  double sy_step = 0.05, sy_sigma_rot = 0.0, sy_sigma_trans = 0.0, sy_rate = 10.0, sy_plane = 5.0;
  bool sy_features = false;
  sy->add_option("--shape", sy_shape, "straight | square | circle");
  sy->add_option("--steps", sy_steps, "Steps (frames = steps + 1)");
  sy->add_option("--step-length", sy_step, "Meters per step");
  sy->add_option("--sigma-rot", sy_sigma_rot, "Odometry noise, degrees per axis");
  sy->add_option("--sigma-trans", sy_sigma_trans, "Odometry noise, fraction of the step per axis");
  sy->add_option("--width", sy_width, "Image width");
  sy->add_option("--height", sy_height, "Image height");
  sy->add_option("--rate", sy_rate, "Frame rate in Hz");
  sy->add_option("--model", sy_model, "heightfield | plane");
  sy->add_option("--plane-distance", sy_plane, "Plane distance for --model plane");
  sy->add_option("--enhance", sy_enhance, "Manifest enhancement: config | on | off");
  sy->add_flag("--features", sy_features, "Also write baseline embeddings");

  // export-cloud
  auto* ec = app.add_subcommand("export-cloud", "Point cloud from a finished run");
  std::string ec_run, ec_output;
  int ec_stride = 1;
  ec->add_option("--run", ec_run, "Run directory")->required();
  ec->add_option("--stride", ec_stride, "Export every n-th frame")->check(CLI::PositiveNumber);
  ec->add_option("--output", ec_output, "PLY path (default <run>/cloud_export.ply)");

  // bench
  auto* be = app.add_subcommand("bench", "Throughput of enhancement, warping and odometry");
  BenchOptions bench_opt;
  be->add_option("--width", bench_opt.width, "Raster width");
  be->add_option("--height", bench_opt.height, "Raster height");
  be->add_option("--repetitions", bench_opt.repetitions, "Enhancement/warp repetitions");
  be->add_option("--odometry-repetitions", bench_opt.odometry_repetitions, "Odometry repetitions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorKind::BadInput);
  }

  try {
    set_num_threads(g.threads);
    const RunLog log{&std::cerr, g.verbose};

    if (*enh) {
      const PipelineConfig c = load_config(g);
      write_pgm16_file(enh_out, quantize_image(enhance(read_pgm_file(enh_in), c.enhance)));
    } else if (*odo) {
      PipelineConfig c = load_config(g);
      c.pipeline.loops_enabled = false;
      c.graph.max_iterations = 0;
      const DatasetManifest m = read_manifest_file(odo_manifest);
      const PipelineResult r = run_pipeline(m, c, log);
      const fs::path out = require_out(g, "odometry");
      ensure_dir(out);
      write_tum_file((out / "trajectory.txt").string(), Trajectory::from_poses(r.timestamps, r.poses_before));
      auto os = open_file(out / "diagnostics.txt");
      os << "# frame loss iterations converged valid_fraction degenerate\n";
      for (const auto& d : r.frames) {
        os << d.index << ' ' << format_double(d.loss) << ' ' << d.iterations << ' ' << d.converged << ' '
           << format_double(d.valid_fraction) << ' ' << d.degenerate << '\n';
      }
    } else if (*lp) {
      const PipelineConfig c = load_config(g);
      const auto loops = detect_manifest_loops(read_manifest_file(lp_manifest), c, log);
      emit(g, "loops.txt", [&](std::ostream& os) {
        os << "# query_frame match_frame similarity\n";
        for (const auto& l : loops) os << l.query_frame << ' ' << l.match_frame << ' ' << format_double(l.similarity) << '\n';
      });
    } else if (*opt) {
      const PipelineConfig c = load_config(g);
      PoseGraph graph = read_g2o_file(opt_graph);
      OptimizeOptions oo;
      oo.max_iterations = c.graph.max_iterations;
      oo.tol = c.graph.tol;
      if (c.graph.huber_delta > 0.0) oo.huber_delta = c.graph.huber_delta;
      const OptimizeReport rep = optimize(graph, oo);
      const fs::path out = require_out(g, "optimize");
      ensure_dir(out);
      write_g2o_file((out / "graph_optimized.g2o").string(), graph);
      emit(g, "optimize_report.txt", [&](std::ostream& os) {
        os << "initial_chi2 = " << format_double(rep.initial_chi2) << '\n';
        os << "final_chi2 = " << format_double(rep.final_chi2) << '\n';
        os << "iterations = " << rep.iterations << '\n';
        os << "converged = " << (rep.converged ? "true" : "false") << '\n';
      });
    } else if (*run) {
      const PipelineConfig c = load_config(g);
      const fs::path out = require_out(g, "run");
      const DatasetManifest m = read_manifest_file(run_manifest);
      const PipelineResult r = run_pipeline(m, c, log);
      write_run_directory(out, m, c, r);
      log.info("wrote " + out.string());
    } else if (*ev) {
      const PipelineConfig c = load_config(g);
      const bool traj = !ev_est.empty() || !ev_ref.empty();
      const bool depth = !ev_pred.empty() || !ev_gt.empty();
      if (traj == depth) {
        throw InvalidArgument("evaluate: give either --estimate/--reference or --pred-depth/--gt-depth");
      }
      if (traj) {
        if (ev_est.empty() || ev_ref.empty()) throw InvalidArgument("evaluate: need both --estimate and --reference");
        TrajectoryEvalOptions o;
        o.alignment = ev_align.empty() ? c.eval.alignment : parse_alignment(ev_align);
        o.max_time_difference = ev_dt.value_or(c.eval.max_time_difference);
        o.rpe_delta = ev_delta.value_or(c.eval.rpe_delta);
        const TrajectoryEvalReport rep = evaluate_trajectory(read_tum_file(ev_est), read_tum_file(ev_ref), o);
        emit(g, "evaluation.txt", [&](std::ostream& os) { write_trajectory_report(os, rep); });
      } else {
        if (ev_pred.empty() || ev_gt.empty()) throw InvalidArgument("evaluate: need both --pred-depth and --gt-depth");
        DepthEvalOptions o = c.eval.depth;
        if (ev_no_median) o.median_scale = false;
        const DepthEvalReport rep = depth_metrics(read_depth_file(ev_pred), read_depth_file(ev_gt), o);
        emit(g, "depth_evaluation.txt", [&](std::ostream& os) { write_depth_report(os, rep); });
      }
    } else if (*sy) {
      SynthDatasetSpec spec;
      spec.scene.seed = g.seed.value_or(1);
      if (sy_model == "plane") {
        spec.scene.depth_model = PlaneModel{Eigen::Vector3d::UnitZ(), sy_plane};
      } else if (sy_model != "heightfield") {
        throw InvalidArgument("synth: unknown model '" + sy_model + "'");
      }
      spec.trajectory.shape = parse_trajectory_shape(sy_shape);
      spec.trajectory.steps = sy_steps;
      spec.trajectory.step_length = sy_step;
      spec.trajectory.sigma_rot_deg = sy_sigma_rot;
      spec.trajectory.sigma_trans_frac = sy_sigma_trans;
      spec.trajectory.seed = g.seed.value_or(1);
      spec.intrinsics = Intrinsics::centered(sy_width, sy_height);
      spec.frame_rate = sy_rate;
      spec.write_features = sy_features;
      if (sy_enhance == "on") {
        spec.enhance = ManifestEnhance{true, EnhanceParams{}};
      } else if (sy_enhance == "off") {
        spec.enhance = ManifestEnhance{false, {}};
      } else if (sy_enhance != "config") {
        throw InvalidArgument("synth: --enhance must be config, on or off");
      }
      const SynthDatasetInfo info = write_synthetic_dataset(require_out(g, "synth"), spec);
      log.info("wrote " + info.manifest.string());
    } else if (*ec) {
      const fs::path out = ec_output.empty() ? fs::path(ec_run) / "cloud_export.ply" : fs::path(ec_output);
      const auto pts = export_cloud(ec_run, ec_stride);
      write_ply_file(out.string(), pts);
      log.info("wrote " + std::to_string(pts.size()) + " points to " + out.string());
    } else if (*be) {
      if (g.seed) bench_opt.seed = *g.seed;
      const BenchReport rep = run_bench(bench_opt);
      emit(g, "bench.txt", [&](std::ostream& os) { write_bench_report(os, rep); });
    }
    return 0;
  } catch (const EmptyResult& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::EmptyResult);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::Internal);
  }
}
