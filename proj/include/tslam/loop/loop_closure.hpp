#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "tslam/core/error.hpp"
#include "tslam/core/random.hpp"
#include "tslam/core/raster.hpp"

namespace tslam {

/// Unit-norm embedding. Construct through make() or normalized() so the
/// invariant holds.
class FeatureVec {
 public:
  static constexpr double kNormTolerance = 1e-9;

  FeatureVec() = default;

  /// Takes values that must already be unit norm.
  static FeatureVec make(Eigen::VectorXd values) {
    if (values.size() == 0) throw InvalidArgument("feature: empty vector");
    if (!values.allFinite()) throw InvalidArgument("feature: non-finite component");
    if (std::abs(values.norm() - 1.0) > kNormTolerance) throw InvalidArgument("feature: vector is not unit norm");
    FeatureVec f;
    f.values_ = std::move(values);
    return f;
  }

  /// Scales values to unit norm. Rejects zero or non-finite input.
  static FeatureVec normalized(const Eigen::VectorXd& values) {
    if (values.size() == 0) throw InvalidArgument("feature: empty vector");
    if (!values.allFinite()) throw InvalidArgument("feature: non-finite component");
    const double n = values.norm();
    if (!(n > 0.0)) throw InvalidArgument("feature: zero vector cannot be normalized");
    FeatureVec f;
    f.values_ = values / n;
    return f;
  }

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::Index size() const { return values_.size(); }
  double operator[](Eigen::Index i) const { return values_(i); }

  friend bool operator==(const FeatureVec& a, const FeatureVec& b) {
    return a.values_.size() == b.values_.size() && a.values_ == b.values_;
  }

 private:
  Eigen::VectorXd values_;
};

inline void require_same_length(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw ShapeError(std::string(what) + ": length mismatch " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

/// Dot product of unit vectors, clamped to [-1, 1] against rounding.
inline double cosine_similarity(const FeatureVec& a, const FeatureVec& b) {
  require_same_length(a.size(), b.size(), "cosine_similarity");
  return std::clamp(a.values().dot(b.values()), -1.0, 1.0);
}

inline constexpr int kBaselineGrid = 16;

namespace detail {

/// Area-overlap weights of n input samples onto m output cells.
inline std::vector<std::vector<std::pair<int, double>>> area_weights(int n, int m) {
  std::vector<std::vector<std::pair<int, double>>> w(m);
  const double scale = static_cast<double>(n) / m;
  for (int o = 0; o < m; ++o) {
    const double lo = o * scale, hi = (o + 1) * scale;
    for (int i = static_cast<int>(std::floor(lo)); i < n && i < hi; ++i) {
      const double overlap = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
      if (overlap > 0.0) w[o].emplace_back(i, overlap / scale);
    }
  }
  return w;
}

}  // namespace detail

/// Hand-crafted descriptor: area downsample to 16x16, subtract the mean,
/// L2-normalize. Constant images map to the canonical vector with every
/// component 1/16.
inline FeatureVec embed_baseline(const ImageGray& img) {
  if (img.width() < 1 || img.height() < 1) throw ShapeError("embed_baseline: empty image");
  constexpr int g = kBaselineGrid;
  const auto wx = detail::area_weights(img.width(), g);
  const auto wy = detail::area_weights(img.height(), g);
  Eigen::VectorXd v(g * g);
  for (int cy = 0; cy < g; ++cy) {
    for (int cx = 0; cx < g; ++cx) {
      double acc = 0.0;
      for (const auto& [y, ay] : wy[cy]) {
        for (const auto& [x, ax] : wx[cx]) acc += ay * ax * img(x, y);
      }
      v(cy * g + cx) = acc;
    }
  }
  v.array() -= v.mean();
  const double n = v.norm();
  if (!(n > 1e-12) || !std::isfinite(n)) {
    return FeatureVec::make(Eigen::VectorXd::Constant(g * g, 1.0 / g));
  }
  return FeatureVec::make(v / n);
}

/// Euclidean distance between two embeddings.
inline double contrastive_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  require_same_length(a.size(), b.size(), "contrastive_distance");
  return (a - b).norm();
}
inline double contrastive_distance(const FeatureVec& a, const FeatureVec& b) {
  return contrastive_distance(a.values(), b.values());
}

struct ContrastiveParams {
  double margin = 1.0;

  void validate() const {
    if (!(margin > 0.0) || !std::isfinite(margin)) throw InvalidArgument("contrastive: margin must be positive");
  }
};

/// 0 = same scene, 1 = different scene.
enum class PairLabel : int { Same = 0, Different = 1 };

/// (1 - Y) * E^2 / 2 + Y * max(0, m - E)^2 / 2.
inline double contrastive_loss(double distance, PairLabel label, const ContrastiveParams& params = {}) {
  params.validate();
  if (!(distance >= 0.0)) throw InvalidArgument("contrastive_loss: distance must be >= 0");
  if (label == PairLabel::Same) return 0.5 * distance * distance;
  const double hinge = std::max(0.0, params.margin - distance);
  return 0.5 * hinge * hinge;
}

struct AugmentKnobs {
  double brightness = 0.0;      // offset drawn from [-brightness, brightness]
  double contrast = 0.0;        // gain drawn from [1 - contrast, 1 + contrast]
  double patch_fraction = 0.0;  // patch side as a fraction of width and height

  void validate() const {
    if (!(brightness >= 0.0) || !(contrast >= 0.0) || contrast >= 1.0) {
      throw InvalidArgument("augment: jitter ranges must be >= 0 and contrast < 1");
    }
    if (!(patch_fraction >= 0.0) || patch_fraction >= 1.0) {
      throw InvalidArgument("augment: patch fraction must be in [0, 1)");
    }
  }
};

struct PatchRect {
  int x = 0, y = 0, width = 0, height = 0;
  bool contains(int px, int py) const { return px >= x && px < x + width && py >= y && py < y + height; }
};

struct Augmented {
  ImageGray image;
  PatchRect patch;        // where the negative patch landed
  ImageGray jittered;     // image after jitter, before the paste
};

/// Brightness/contrast jitter around mid-gray, then one rectangle copied from
/// the negative image (random source location) pasted at a random location.
inline Augmented augment_pair_detailed(const ImageGray& img, const ImageGray& negative, std::uint64_t seed,
                                       const AugmentKnobs& knobs) {
  knobs.validate();
  require_same_shape(img, negative, "augment_pair");
  Rng rng(seed);
  const double offset = knobs.brightness > 0.0 ? rng.uniform(-knobs.brightness, knobs.brightness) : 0.0;
  const double gain = knobs.contrast > 0.0 ? rng.uniform(1.0 - knobs.contrast, 1.0 + knobs.contrast) : 1.0;
  Augmented out;
  out.jittered = img;
  if (offset != 0.0 || gain != 1.0) {
    for (auto& v : out.jittered) v = std::clamp(0.5 + gain * (v - 0.5) + offset, 0.0, 1.0);
  }
  out.image = out.jittered;
  const int pw = static_cast<int>(std::floor(knobs.patch_fraction * img.width()));
  const int ph = static_cast<int>(std::floor(knobs.patch_fraction * img.height()));
  if (pw > 0 && ph > 0) {
    const int sx = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.width() - pw + 1)));
    const int sy = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.height() - ph + 1)));
    const int dx = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.width() - pw + 1)));
    const int dy = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.height() - ph + 1)));
    for (int y = 0; y < ph; ++y) {
      for (int x = 0; x < pw; ++x) out.image(dx + x, dy + y) = std::clamp(negative(sx + x, sy + y), 0.0, 1.0);
    }
    out.patch = {dx, dy, pw, ph};
  }
  return out;
}

inline ImageGray augment_pair(const ImageGray& img, const ImageGray& negative, std::uint64_t seed,
                              const AugmentKnobs& knobs) {
  return augment_pair_detailed(img, negative, seed, knobs).image;
}

struct LoopPolicy {
  int keyframe_stride = 15;
  int suppression_window = 150;  // raw frames
  double threshold = 0.85;

  void validate() const {
    if (keyframe_stride < 1) throw InvalidArgument("loop policy: keyframe_stride must be >= 1");
    if (suppression_window < 0) throw InvalidArgument("loop policy: suppression_window must be >= 0");
    if (!(threshold >= -1.0 && threshold <= 1.0)) throw InvalidArgument("loop policy: threshold must be in [-1, 1]");
  }
};

struct Keyframe {
  int id = 0;
  int frame_index = 0;
  FeatureVec feature;
};

struct LoopCandidate {
  int query_frame = 0;
  int match_frame = 0;
  double similarity = 0.0;

  friend bool operator==(const LoopCandidate&, const LoopCandidate&) = default;
};

/// Sequential keyframe matcher. Frames must be offered in increasing index
/// order; only multiples of the stride become keyframes. A query is matched
/// against keyframes at least suppression_window frames older, and after a
/// detection at frame q every query with index <= q + suppression_window is
/// skipped (but still stored as a keyframe).
class LoopDetector {
 public:
  explicit LoopDetector(LoopPolicy policy) : policy_(policy) { policy_.validate(); }

  const LoopPolicy& policy() const { return policy_; }
  const std::vector<Keyframe>& keyframes() const { return keyframes_; }

  static bool is_keyframe(int frame_index, const LoopPolicy& p) { return frame_index % p.keyframe_stride == 0; }

  std::optional<LoopCandidate> add_frame(int frame_index, const FeatureVec& feature) {
    if (frame_index < 0 || frame_index <= last_frame_) {
      throw InvalidArgument("loop detector: frame indices must be non-negative and increasing");
    }
    last_frame_ = frame_index;
    if (!is_keyframe(frame_index, policy_)) return std::nullopt;
    if (!keyframes_.empty()) require_same_length(feature.size(), keyframes_.front().feature.size(), "loop detector");

    std::optional<LoopCandidate> found;
    const bool suspended = last_detection_ && frame_index <= *last_detection_ + policy_.suppression_window;
    if (!suspended) {
      const int newest_allowed = frame_index - policy_.suppression_window;
      for (const auto& kf : keyframes_) {
        if (kf.frame_index > newest_allowed) break;
        const double s = cosine_similarity(feature, kf.feature);
        // Strict comparison keeps the oldest match on ties.
        if (s >= policy_.threshold && (!found || s > found->similarity)) {
          found = LoopCandidate{frame_index, kf.frame_index, s};
        }
      }
    }
    keyframes_.push_back({static_cast<int>(keyframes_.size()), frame_index, feature});
    if (found) last_detection_ = frame_index;
    return found;
  }

 private:
  LoopPolicy policy_;
  std::vector<Keyframe> keyframes_;
  std::optional<int> last_detection_;
  int last_frame_ = -1;
};

/// Runs a LoopDetector over per-frame features (index = frame number).
inline std::vector<LoopCandidate> detect_loops(const std::vector<FeatureVec>& features, const LoopPolicy& policy) {
  LoopDetector det(policy);
  std::vector<LoopCandidate> out;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (auto c = det.add_frame(static_cast<int>(i), features[i])) out.push_back(*c);
  }
  return out;
}

struct ScoredPair {
  double similarity = 0.0;
  bool is_true_loop = false;
};

/// Smallest threshold (under the rule similarity >= threshold) with zero false
/// positives on the input. It is the smallest positive similarity above every
/// negative; when no positive clears the negatives the result is just above
/// the largest negative, so recall is zero but false positives stay zero.
inline double calibrate_threshold(const std::vector<ScoredPair>& pairs) {
  double max_neg = -std::numeric_limits<double>::infinity();
  bool any_pos = false;
  for (const auto& p : pairs) {
    if (!std::isfinite(p.similarity)) throw InvalidArgument("calibrate_threshold: non-finite similarity");
    if (p.is_true_loop) {
      any_pos = true;
    } else {
      max_neg = std::max(max_neg, p.similarity);
    }
  }
  if (!any_pos) throw InvalidArgument("calibrate_threshold: no true loops in input");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : pairs) {
    if (p.is_true_loop && p.similarity > max_neg) best = std::min(best, p.similarity);
  }
  if (std::isfinite(best)) return best;
  return std::nextafter(max_neg, std::numeric_limits<double>::infinity());
}

}  // namespace tslam
