#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "tslam/core/error.hpp"
#include "tslam/enhance/thermal_enhance.hpp"
#include "tslam/eval/depth_metrics.hpp"
#include "tslam/eval/trajectory.hpp"
#include "tslam/io/config.hpp"
#include "tslam/loop/loop_closure.hpp"
#include "tslam/objective/losses.hpp"
#include "tslam/odometry/direct_odometry.hpp"

namespace tslam {

struct GraphConfig {
  double odometry_info_scale = 1.0;
  double loop_info_scale = 10.0;
  int max_iterations = 100;
  double tol = 1e-10;
  double huber_delta = 0.0;  // 0 disables the robust kernel
  /// Per-axis odometry standard deviations. Both zero: identity information.
  /// Both positive: information 1/sigma^2 per axis, for odometry and (scaled)
  /// loop edges alike.
  double odometry_sigma_rot_deg = 0.0;
  double odometry_sigma_trans = 0.0;  // meters

  void validate() const {
    if (!(odometry_info_scale > 0.0) || !(loop_info_scale > 0.0)) {
      throw InvalidArgument("graph: information scales must be positive");
    }
    const bool rot = odometry_sigma_rot_deg > 0.0, trans = odometry_sigma_trans > 0.0;
    if (!(odometry_sigma_rot_deg >= 0.0) || !(odometry_sigma_trans >= 0.0) || rot != trans) {
      throw InvalidArgument("graph: odometry sigmas must both be zero or both be positive");
    }
    if (max_iterations < 0 || !(tol > 0.0) || !(huber_delta >= 0.0)) throw InvalidArgument("graph: invalid solver options");
  }
};

struct EvalConfig {
  Alignment alignment = Alignment::Similarity;
  double max_time_difference = kDefaultMaxTimeDifference;
  int rpe_delta = 1;
  DepthEvalOptions depth;

  void validate() const {
    if (!(max_time_difference >= 0.0) || rpe_delta < 1) throw InvalidArgument("eval: invalid options");
    depth.validate();
  }
};

enum class FeatureSource { Baseline, File };

struct PipelineOptions {
  bool enhance_enabled = true;
  bool constant_velocity = true;  // initialize odometry with the previous estimate
  bool loops_enabled = true;
  FeatureSource features = FeatureSource::Baseline;
  /// Extra seeded perturbation of each odometry estimate before it enters the
  /// graph; for drift experiments on clean synthetic data.
  double inject_noise_rot_deg = 0.0;
  double inject_noise_trans_frac = 0.0;  // of the estimated step length
  int cloud_stride = 5;

  void validate() const {
    if (!(inject_noise_rot_deg >= 0.0) || !(inject_noise_trans_frac >= 0.0)) {
      throw InvalidArgument("pipeline: noise injection must be >= 0");
    }
    if (cloud_stride < 1) throw InvalidArgument("pipeline: cloud_stride must be >= 1");
  }
};

struct PipelineConfig {
  EnhanceParams enhance;
  OdometryParams odometry;
  LossWeights loss;
  LoopPolicy loop;
  GraphConfig graph;
  EvalConfig eval;
  PipelineOptions pipeline;
  std::uint64_t seed = 1;

  void validate() const {
    enhance.validate();
    odometry.validate();
    loss.validate();
    loop.validate();
    graph.validate();
    eval.validate();
    pipeline.validate();
  }
};

namespace detail {

struct ConfigBinding {
  std::string key;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename Field>
ConfigBinding bind_double(std::string key, Field field) {
  return {key,
          [field, key](PipelineConfig& c, const std::string& v) { field(c) = parse_double(v, key); },
          [field](const PipelineConfig& c) { return format_double(field(c)); }};
}

template <typename Field>
ConfigBinding bind_int(std::string key, Field field) {
  return {key,
          [field, key](PipelineConfig& c, const std::string& v) {
            const long long x = parse_int(v, key);
            if (x < -(1LL << 31) || x >= (1LL << 31)) throw InvalidArgument(key + ": out of range");
            field(c) = static_cast<int>(x);
          },
          [field](const PipelineConfig& c) { return std::to_string(field(c)); }};
}

template <typename Field>
ConfigBinding bind_bool(std::string key, Field field) {
  return {key, [field, key](PipelineConfig& c, const std::string& v) { field(c) = parse_bool(v, key); },
          [field](const PipelineConfig& c) {
            return std::string(field(c) ? "true" : "false");
          }};
}

inline const std::vector<ConfigBinding>& config_bindings() {
  using C = PipelineConfig;
  static const std::vector<ConfigBinding> b = {
      bind_bool("enhance.enabled", [](auto& c) -> auto& { return c.pipeline.enhance_enabled; }),
      bind_double("enhance.clip_lo", [](auto& c) -> auto& { return c.enhance.clip_lo; }),
      bind_double("enhance.clip_hi", [](auto& c) -> auto& { return c.enhance.clip_hi; }),
      bind_double("enhance.sigma", [](auto& c) -> auto& { return c.enhance.sigma; }),
      bind_double("enhance.detail_gain", [](auto& c) -> auto& { return c.enhance.detail_gain; }),
      bind_double("enhance.out_lo", [](auto& c) -> auto& { return c.enhance.out_lo; }),
      bind_double("enhance.out_hi", [](auto& c) -> auto& { return c.enhance.out_hi; }),
      bind_int("odometry.pyramid_levels", [](auto& c) -> auto& { return c.odometry.pyramid_levels; }),
      bind_int("odometry.max_iterations", [](auto& c) -> auto& { return c.odometry.max_iterations; }),
      bind_double("odometry.damping_init", [](auto& c) -> auto& { return c.odometry.damping_init; }),
      bind_double("odometry.damping_up", [](auto& c) -> auto& { return c.odometry.damping_up; }),
      bind_double("odometry.damping_down", [](auto& c) -> auto& { return c.odometry.damping_down; }),
      bind_double("odometry.convergence_tol", [](auto& c) -> auto& { return c.odometry.convergence_tol; }),
      bind_double("odometry.min_valid_fraction", [](auto& c) -> auto& { return c.odometry.min_valid_fraction; }),
      bind_bool("odometry.use_auto_mask", [](auto& c) -> auto& { return c.odometry.use_auto_mask; }),
      bind_bool("odometry.constant_velocity", [](auto& c) -> auto& { return c.pipeline.constant_velocity; }),
      bind_double("loss.lambda_pm", [](auto& c) -> auto& { return c.loss.lambda_pm; }),
      bind_double("loss.lambda_gc", [](auto& c) -> auto& { return c.loss.lambda_gc; }),
      bind_double("loss.lambda_sm", [](auto& c) -> auto& { return c.loss.lambda_sm; }),
      bind_bool("loop.enabled", [](auto& c) -> auto& { return c.pipeline.loops_enabled; }),
      bind_int("loop.keyframe_stride", [](auto& c) -> auto& { return c.loop.keyframe_stride; }),
      bind_int("loop.suppression_window", [](auto& c) -> auto& { return c.loop.suppression_window; }),
      bind_double("loop.threshold", [](auto& c) -> auto& { return c.loop.threshold; }),
      {"loop.features",
       [](C& c, const std::string& v) {
         if (v == "baseline") {
           c.pipeline.features = FeatureSource::Baseline;
         } else if (v == "file") {
           c.pipeline.features = FeatureSource::File;
         } else {
           throw InvalidArgument("loop.features: expected 'baseline' or 'file', got '" + v + "'");
         }
       },
       [](const C& c) { return std::string(c.pipeline.features == FeatureSource::File ? "file" : "baseline"); }},
      bind_double("graph.odometry_info_scale", [](auto& c) -> auto& { return c.graph.odometry_info_scale; }),
      bind_double("graph.loop_info_scale", [](auto& c) -> auto& { return c.graph.loop_info_scale; }),
      bind_int("graph.max_iterations", [](auto& c) -> auto& { return c.graph.max_iterations; }),
      bind_double("graph.tol", [](auto& c) -> auto& { return c.graph.tol; }),
      bind_double("graph.huber_delta", [](auto& c) -> auto& { return c.graph.huber_delta; }),
      bind_double("graph.odometry_sigma_rot_deg", [](auto& c) -> auto& { return c.graph.odometry_sigma_rot_deg; }),
      bind_double("graph.odometry_sigma_trans", [](auto& c) -> auto& { return c.graph.odometry_sigma_trans; }),
      {"eval.alignment", [](C& c, const std::string& v) { c.eval.alignment = parse_alignment(v); },
       [](const C& c) { return std::string(to_string(c.eval.alignment)); }},
      bind_double("eval.max_time_difference", [](auto& c) -> auto& { return c.eval.max_time_difference; }),
      bind_int("eval.rpe_delta", [](auto& c) -> auto& { return c.eval.rpe_delta; }),
      bind_bool("eval.median_scale", [](auto& c) -> auto& { return c.eval.depth.median_scale; }),
      bind_double("eval.min_depth", [](auto& c) -> auto& { return c.eval.depth.min_depth; }),
      bind_double("eval.max_depth", [](auto& c) -> auto& { return c.eval.depth.max_depth; }),
      bind_double("pipeline.inject_noise_rot_deg", [](auto& c) -> auto& { return c.pipeline.inject_noise_rot_deg; }),
      bind_double("pipeline.inject_noise_trans_frac",
                  [](auto& c) -> auto& { return c.pipeline.inject_noise_trans_frac; }),
      bind_int("pipeline.cloud_stride", [](auto& c) -> auto& { return c.pipeline.cloud_stride; }),
      {"pipeline.seed", [](C& c, const std::string& v) { c.seed = parse_u64(v, "pipeline.seed"); },
       [](const C& c) { return std::to_string(c.seed); }},
  };
  return b;
}

}  // namespace detail

/// Applies entries over the defaults. Unknown or repeated keys are errors.
inline PipelineConfig config_from_entries(const std::vector<ConfigEntry>& entries, const std::string& name = "<config>",
                                          PipelineConfig base = {}) {
  std::map<std::string, int> seen;
  for (const auto& e : entries) {
    const auto& bindings = detail::config_bindings();
    const auto it = std::find_if(bindings.begin(), bindings.end(), [&](const auto& b) { return b.key == e.key; });
    const std::string where = name + ":" + std::to_string(e.line);
    if (it == bindings.end()) throw InvalidArgument(where + ": unknown config key '" + e.key + "'");
    if (!seen.emplace(e.key, e.line).second) throw InvalidArgument(where + ": duplicate config key '" + e.key + "'");
    try {
      it->set(base, e.value);
    } catch (const InvalidArgument& ex) {
      throw InvalidArgument(where + ": " + ex.what());
    }
  }
  try {
    base.validate();
  } catch (const InvalidArgument& ex) {
    throw InvalidArgument(name + ": " + ex.what());
  }
  return base;
}

inline PipelineConfig load_config_file(const std::string& path) {
  return config_from_entries(parse_config_file(path), path);
}

/// Every key with its current value; reloading the text reproduces the
/// configuration exactly.
inline void write_config(std::ostream& os, const PipelineConfig& c) {
  for (const auto& b : detail::config_bindings()) os << b.key << " = " << b.get(c) << '\n';
}

inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& b : detail::config_bindings()) keys.push_back(b.key);
  return keys;
}

}  // namespace tslam
