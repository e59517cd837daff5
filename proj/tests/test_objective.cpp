#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace tslam;
using tslam::testing::random_depth;
using tslam::testing::random_image;
using tslam::testing::render_pair;
using tslam::testing::RenderedPair;

namespace {

// Literal SSIM of the 3x3 window at (x, y) over in-raster pixels with
// mask != 0: population means, variances and covariance by direct summation.
double ssim_oracle(const ImageGray& a, const ImageGray& b, const Mask* mask, int x, int y) {
  std::vector<double> va, vb;
  for (int yy = y - 1; yy <= y + 1; ++yy) {
    for (int xx = x - 1; xx <= x + 1; ++xx) {
      if (!a.contains(xx, yy)) continue;
      if (mask && !(*mask)(xx, yy)) continue;
      va.push_back(a(xx, yy));
      vb.push_back(b(xx, yy));
    }
  }
  const double n = static_cast<double>(va.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    ma += va[i] / n;
    mb += vb[i] / n;
  }
  double sa = 0, sb = 0, sab = 0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    sa += (va[i] - ma) * (va[i] - ma) / n;
    sb += (vb[i] - mb) * (vb[i] - mb) / n;
    sab += (va[i] - ma) * (vb[i] - mb) / n;
  }
  const double c1 = 0.0001, c2 = 0.0009;
  return (2 * ma * mb + c1) * (2 * sab + c2) / ((ma * ma + mb * mb + c1) * (sa + sb + c2));
}

double photometric_oracle(const ImageGray& target, const WarpResult& w, const MaskStack& m, double lambda) {
  double sum = 0.0;
  int n = 0;
  for (int y = 0; y < target.height(); ++y) {
    for (int x = 0; x < target.width(); ++x) {
      if (!m.validity(x, y) || !m.auto_mask(x, y)) continue;
      const double s = ssim_oracle(target, w.synthesized, &m.validity, x, y);
      const double l1 = std::abs(target(x, y) - w.synthesized(x, y));
      sum += m.dynamic_mask(x, y) * (lambda * l1 + (1 - lambda) / 2 * (1 - s));
      ++n;
    }
  }
  return n ? sum / n : 0.0;
}

WarpResult random_warp(int w, int h, Rng& rng) {
  const Intrinsics k = Intrinsics::centered(w, h);
  const ImageGray src = random_image(w, h, rng);
  const DepthMap dt = random_depth(w, h, rng), ds = random_depth(w, h, rng);
  return inverse_warp(src, dt, se3_exp(tslam::testing::random_twist(rng, 0.02, 0.1)), k, ds);
}

ImageGray mirror(const ImageGray& img) {
  ImageGray out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out(img.width() - 1 - x, y) = img(x, y);
  return out;
}

DepthMap mirror(const DepthMap& d) {
  DepthMap out(d.width(), d.height());
  for (int y = 0; y < d.height(); ++y) {
    for (int x = 0; x < d.width(); ++x) {
      out.depth(d.width() - 1 - x, y) = d.depth(x, y);
      out.valid(d.width() - 1 - x, y) = d.valid(x, y);
    }
  }
  return out;
}

struct GradientFixture {
  Intrinsics k = Intrinsics::centered(64, 48);
  RenderedPair pair;
  PoseSE3 pose;  // evaluation pose, off the truth

  explicit GradientFixture(std::uint64_t seed) {
    SceneSpec scene;
    scene.seed = seed;
    const PoseSE3 ws = se3_exp(make_twist({0.0, deg2rad(1.0), 0.0}, {0.05, 0.0, 0.02}));
    pair = render_pair(scene, k, PoseSE3::identity(), ws);
    pose = se3_exp(make_twist({deg2rad(0.2), -deg2rad(0.3), deg2rad(0.1)}, {0.01, -0.005, 0.008})) * pair.t_to_s;
  }

  FrozenMasks freeze(const LossWeights& w, const PoseSE3& at) const {
    return freeze_branch({pair.target, pair.source, pair.target_depth, pair.source_depth, k}, at, w);
  }

  double loss(const LossWeights& w, const FrozenMasks& fm, const PoseSE3& at, const DepthMap& dt) const {
    return evaluate_objective({pair.target, pair.source, dt, pair.source_depth, k}, at, w, {}, &fm).loss.l_total;
  }
};

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic), 1e-12);
}

}  // namespace

TEST(Ssim, SelfSimilarityIsOne) {
  Rng rng(1);
  const ImageGray a = random_image(13, 9, rng);
  for (double v : ssim_map(a, a)) EXPECT_EQ(v, 1.0);
  const ImageGray flat(5, 5, 0.3);
  for (double v : ssim_map(flat, flat)) EXPECT_EQ(v, 1.0);
}

TEST(Ssim, IsSymmetric) {
  Rng rng(2);
  const ImageGray a = random_image(12, 10, rng), b = random_image(12, 10, rng);
  const auto ab = ssim_map(a, b), ba = ssim_map(b, a);
  for (std::size_t i = 0; i < ab.size(); ++i) EXPECT_EQ(ab[i], ba[i]);
}

TEST(Ssim, MatchesLiteralWindowFormula) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const ImageGray a = random_image(8, 8, rng), b = random_image(8, 8, rng);
    const auto s = ssim_map(a, b);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) {
        EXPECT_NEAR(s(x, y), ssim_oracle(a, b, nullptr, x, y), 1e-10);
        EXPECT_GE(s(x, y), -1.0);
        EXPECT_LE(s(x, y), 1.0);
      }
    }
  }
}

TEST(Ssim, DimensionMismatchIsReported) {
  EXPECT_THROW(ssim_map(ImageGray(4, 4), ImageGray(4, 5)), ShapeError);
}

TEST(PhotometricLoss, PerfectReconstructionIsZero) {
  Rng rng(4);
  const ImageGray it = random_image(10, 8, rng);
  WarpResult w;
  w.synthesized = it;
  EXPECT_EQ(photometric_loss(it, w, MaskStack::all_pass(10, 8), LossWeights{}), 0.0);
}

TEST(PhotometricLoss, PureL1IsTheMaskedMeanAbsoluteDifference) {
  Rng rng(5);
  const ImageGray it = random_image(10, 8, rng);
  WarpResult w;
  w.synthesized = random_image(10, 8, rng);
  MaskStack m = MaskStack::all_pass(10, 8);
  for (int i = 0; i < 80; i += 3) m.validity[i] = 0;
  for (int i = 1; i < 80; i += 7) m.auto_mask[i] = 0;
  LossWeights lw;
  lw.lambda_pm = 1.0;
  double sum = 0.0;
  int n = 0;
  for (int i = 0; i < 80; ++i) {
    if (!m.validity[i] || !m.auto_mask[i]) continue;
    sum += std::abs(it[i] - w.synthesized[i]);
    ++n;
  }
  EXPECT_NEAR(photometric_loss(it, w, m, lw), sum / n, 1e-15);
}

TEST(PhotometricLoss, MatchesNaiveEvaluation) {
  Rng rng(6);
  for (int trial = 0; trial < 25; ++trial) {
    const ImageGray it = random_image(12, 9, rng);
    WarpResult w = random_warp(12, 9, rng);
    MaskStack m{w.validity, Mask(12, 9, 1), Raster<double>(12, 9, 1.0)};
    for (auto& a : m.auto_mask) a = rng.uniform() < 0.8;
    for (auto& d : m.dynamic_mask) d = rng.uniform();
    LossWeights lw;
    lw.lambda_pm = rng.uniform();
    EXPECT_NEAR(photometric_loss(it, w, m, lw), photometric_oracle(it, w, m, lw.lambda_pm), 1e-12);
  }
}

TEST(PhotometricLoss, NoQualifyingPixelGivesZero) {
  Rng rng(7);
  WarpResult w;
  w.synthesized = random_image(6, 6, rng);
  MaskStack m = MaskStack::all_pass(6, 6);
  m.validity = Mask(6, 6, 0);
  EXPECT_EQ(photometric_loss(random_image(6, 6, rng), w, m, LossWeights{}), 0.0);
}

TEST(GeometricConsistency, ConsistentDepthsGiveZero) {
  Rng rng(8);
  WarpResult w;
  w.validity = Mask(5, 4, 1);
  w.projected_depth = random_depth(5, 4, rng);
  w.sampled_depth = w.projected_depth;
  const auto gc = geometric_consistency(w);
  EXPECT_EQ(gc.l_gc, 0.0);
  for (double v : gc.m_sd) EXPECT_EQ(v, 1.0);
}

TEST(GeometricConsistency, OneVersusThreeIsOneHalf) {
  WarpResult w;
  w.validity = Mask(1, 1, 1);
  w.projected_depth = DepthMap::from_depths(Raster<double>(1, 1, 1.0));
  w.sampled_depth = DepthMap::from_depths(Raster<double>(1, 1, 3.0));
  const auto gc = geometric_consistency(w);
  EXPECT_EQ(gc.d_diff(0, 0), 0.5);
  EXPECT_EQ(gc.m_sd(0, 0), 0.5);
  EXPECT_EQ(gc.l_gc, 0.5);
}

TEST(GeometricConsistency, DifferenceIsBoundedAndZeroOutsideValidity) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const WarpResult w = random_warp(16, 12, rng);
    const auto gc = geometric_consistency(w);
    for (std::size_t i = 0; i < w.validity.size(); ++i) {
      EXPECT_GE(gc.d_diff[i], 0.0);
      EXPECT_LT(gc.d_diff[i], 1.0);
      EXPECT_DOUBLE_EQ(gc.m_sd[i], 1.0 - gc.d_diff[i]);
      if (!w.validity[i]) {
        EXPECT_EQ(gc.d_diff[i], 0.0);
      }
    }
  }
  EXPECT_LT(depth_inconsistency(1.0, 1e12), 1.0);
}

TEST(Smoothness, ConstantDepthIsZero) {
  Rng rng(10);
  EXPECT_EQ(smoothness_loss(DepthMap::from_depths(Raster<double>(7, 6, 4.2)), random_image(7, 6, rng)), 0.0);
}

TEST(Smoothness, RampWithFlatImage) {
  // d = 1 + x on 4x4: mean 2.5, normalized step 0.4, every horizontal pair 0.16.
  Raster<double> d(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) d(x, y) = 1.0 + x;
  const ImageGray flat(4, 4, 0.5);
  EXPECT_NEAR(smoothness_loss(DepthMap::from_depths(d), flat), 0.16, 1e-15);
}

TEST(Smoothness, StrongImageEdgeSuppressesTheDepthTerm) {
  Raster<double> d(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) d(x, y) = 1.0 + x;
  const DepthMap depth = DepthMap::from_depths(d);
  ImageGray edge(4, 4, 0.0);
  for (int y = 0; y < 4; ++y)
    for (int x = 2; x < 4; ++x) edge(x, y) = 5.0;  // |dI/dx| = 5 between columns 1 and 2
  const double flat = smoothness_loss(depth, ImageGray(4, 4, 0.0));
  const double edged = smoothness_loss(depth, edge);
  // 12 horizontal pairs; the 4 straddling the edge are scaled by e^{-10}.
  const double per_pair = 0.16;
  EXPECT_NEAR(edged, (8 * per_pair + 4 * per_pair * std::exp(-10.0)) / 12.0, 1e-15);
  EXPECT_NEAR(flat - edged, 4 * per_pair * (1 - std::exp(-10.0)) / 12.0, 1e-15);
}

TEST(Smoothness, InvariantToDepthScale) {
  Rng rng(11);
  const DepthMap d = random_depth(9, 7, rng);
  DepthMap d3 = d;
  for (auto& v : d3.depth) v *= 3.0;
  const ImageGray img = random_image(9, 7, rng);
  EXPECT_NEAR(smoothness_loss(d, img), smoothness_loss(d3, img), 1e-14);
}

TEST(AutoMask, StaticCameraMasksEverything) {
  Rng rng(12);
  const ImageGray it = random_image(8, 8, rng);
  WarpResult w;
  w.synthesized = random_image(8, 8, rng);
  EXPECT_EQ(count_true(auto_mask(it, it, w)), 0u);
}

TEST(AutoMask, PerfectWarpKeepsExactlyTheChangedPixels) {
  Rng rng(13);
  const ImageGray it = random_image(8, 8, rng);
  ImageGray is = it;
  for (int i = 0; i < 64; i += 5) is[i] = rng.uniform();
  WarpResult w;
  w.synthesized = it;
  const Mask m = auto_mask(it, is, w);
  for (int i = 0; i < 64; ++i) EXPECT_EQ(m[i] != 0, std::abs(it[i] - is[i]) > 0.0);
}

TEST(AutoMask, MatchesNaiveComparisonAndComplementsUnderRoleSwap) {
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const ImageGray it = random_image(10, 7, rng), is = random_image(10, 7, rng);
    WarpResult w;
    w.synthesized = random_image(10, 7, rng);
    // Force a few ties.
    for (int i = 0; i < 70; i += 11) w.synthesized[i] = is[i];
    const Mask m = auto_mask(it, is, w);
    WarpResult swapped;
    swapped.synthesized = is;
    const Mask ms = auto_mask(it, w.synthesized, swapped);
    for (int i = 0; i < 70; ++i) {
      const double warped = std::abs(it[i] - w.synthesized[i]), unwarped = std::abs(it[i] - is[i]);
      EXPECT_EQ(m[i] != 0, warped < unwarped);
      if (warped != unwarped) {
        EXPECT_NE(m[i], ms[i]);
      } else {
        EXPECT_EQ(m[i], 0);
        EXPECT_EQ(ms[i], 0);
      }
    }
  }
}

TEST(TotalLoss, ZeroAuxiliaryWeightsLeaveOnlyReconstruction) {
  const Intrinsics k = Intrinsics::centered(48, 36);
  Rng rng(15);
  const ImageGray it = random_image(48, 36, rng), is = random_image(48, 36, rng);
  const DepthMap dt = random_depth(48, 36, rng), ds = random_depth(48, 36, rng);
  LossWeights w;
  w.lambda_gc = 0.0;
  w.lambda_sm = 0.0;
  const auto lb = total_loss(it, is, dt, ds, se3_exp(make_twist({0.01, 0, 0}, {0.05, 0, 0})), k, w);
  EXPECT_GT(lb.l_gc, 0.0);
  EXPECT_GT(lb.l_sm, 0.0);
  EXPECT_EQ(lb.l_total, lb.l_rec);
}

TEST(TotalLoss, BreakdownCombinesLinearly) {
  const Intrinsics k = Intrinsics::centered(48, 36);
  Rng rng(16);
  const ImageGray it = random_image(48, 36, rng), is = random_image(48, 36, rng);
  const DepthMap dt = random_depth(48, 36, rng), ds = random_depth(48, 36, rng);
  const PoseSE3 t = se3_exp(make_twist({0.0, 0.02, 0}, {0.02, 0, 0.01}));
  LossWeights w;
  const auto a = total_loss(it, is, dt, ds, t, k, w);
  EXPECT_NEAR(a.l_total, a.l_rec + w.lambda_gc * a.l_gc + w.lambda_sm * a.l_sm, 1e-12);
  w.lambda_gc *= 2.0;
  const auto b = total_loss(it, is, dt, ds, t, k, w);
  EXPECT_EQ(a.l_gc, b.l_gc);
  EXPECT_NEAR(b.l_total - a.l_total, 0.5 * w.lambda_gc * a.l_gc, 1e-12);
}

TEST(TotalLoss, RenderedPairAtTruthReconstructsWell) {
  const Intrinsics k = Intrinsics::centered(160, 120);
  SceneSpec scene;
  const auto p = render_pair(scene, k, PoseSE3::identity(),
                             se3_exp(make_twist({0.0, deg2rad(1.0), 0.0}, {0.05, 0.0, 0.0})));
  const auto lb = total_loss(p.target, p.source, p.target_depth, p.source_depth, p.t_to_s, k, LossWeights{});
  EXPECT_LT(lb.l_rec, 0.01);
  EXPECT_GT(lb.valid_count, 0u);
}

TEST(TotalLoss, FiniteAndNonNegativeOnRandomInputs) {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const int w = 4 + static_cast<int>(rng.below(20)), h = 4 + static_cast<int>(rng.below(16));
    const Intrinsics k = Intrinsics::centered(w, h);
    const ImageGray it = random_image(w, h, rng), is = random_image(w, h, rng);
    DepthMap dt = random_depth(w, h, rng, 0.2, 30.0), ds = random_depth(w, h, rng, 0.2, 30.0);
    dt.set(0, 0, 0.0);
    LossWeights lw{rng.uniform(), rng.uniform(0, 2), rng.uniform(0, 2)};
    const auto lb = total_loss(it, is, dt, ds, se3_exp(tslam::testing::random_twist(rng, 0.1, 0.5)), k, lw);
    for (double v : {lb.l_rec, lb.l_gc, lb.l_sm, lb.l_total}) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GE(v, 0.0);
    }
  }
}

TEST(TotalLoss, InvariantUnderHorizontalMirroring) {
  const Intrinsics k = Intrinsics::centered(64, 48);  // cx is the mirror axis
  SceneSpec scene;
  scene.seed = 3;
  const auto p = render_pair(scene, k, PoseSE3::identity(),
                             se3_exp(make_twist({0.01, deg2rad(1.0), -0.005}, {0.05, 0.01, 0.02})));
  const PoseSE3 t = se3_exp(make_twist({0.002, 0.001, 0.0}, {0.01, 0.0, 0.0})) * p.t_to_s;
  const Eigen::Matrix3d m = Eigen::Vector3d(-1.0, 1.0, 1.0).asDiagonal();
  const PoseSE3 tm(m * t.rotation() * m, m * t.translation());
  ObjectiveOptions opt;
  for (bool auto_on : {false, true}) {
    opt.use_auto_mask = auto_on;
    const auto a = total_loss(p.target, p.source, p.target_depth, p.source_depth, t, k, LossWeights{}, opt);
    const auto b = total_loss(mirror(p.target), mirror(p.source), mirror(p.target_depth), mirror(p.source_depth),
                              tm, k, LossWeights{}, opt);
    EXPECT_EQ(a.valid_count, b.valid_count);
    EXPECT_NEAR(a.l_rec, b.l_rec, 1e-12);
    EXPECT_NEAR(a.l_gc, b.l_gc, 1e-12);
    EXPECT_NEAR(a.l_sm, b.l_sm, 1e-12);
  }
}

TEST(LossGradient, TwistGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const GradientFixture f(seed);
    LossWeights w;
    w.lambda_pm = 1.0;
    const FrozenMasks fm = f.freeze(w, f.pose);
    const LossGradient g = loss_gradient(f.pair.target, f.pair.source, f.pair.target_depth, f.pair.source_depth,
                                         f.pose, f.k, w, {}, &fm);
    const double h = 1e-6;
    for (int i = 0; i < 6; ++i) {
      Twist e = Twist::Zero();
      e(i) = h;
      const double fd = (f.loss(w, fm, se3_exp(e) * f.pose, f.pair.target_depth) -
                         f.loss(w, fm, se3_exp(-e) * f.pose, f.pair.target_depth)) /
                        (2 * h);
      EXPECT_LT(relative_error(g.twist(i), fd), 1e-4) << "seed " << seed << " axis " << i << ": " << g.twist(i)
                                                       << " vs " << fd;
    }
  }
}

TEST(LossGradient, TwistGradientWithSsimTermMatchesFiniteDifferences) {
  const GradientFixture f(4);
  const LossWeights w;  // default mix, SSIM included
  const FrozenMasks fm = f.freeze(w, f.pose);
  const LossGradient g = loss_gradient(f.pair.target, f.pair.source, f.pair.target_depth, f.pair.source_depth,
                                       f.pose, f.k, w, {}, &fm);
  const double h = 1e-6;
  for (int i = 0; i < 6; ++i) {
    Twist e = Twist::Zero();
    e(i) = h;
    const double fd =
        (f.loss(w, fm, se3_exp(e) * f.pose, f.pair.target_depth) - f.loss(w, fm, se3_exp(-e) * f.pose, f.pair.target_depth)) /
        (2 * h);
    EXPECT_LT(relative_error(g.twist(i), fd), 1e-3) << i;
  }
}

TEST(LossGradient, DepthGradientMatchesFiniteDifferences) {
  for (double lambda_pm : {1.0, 0.15}) {
    const GradientFixture f(5);
    LossWeights w;
    w.lambda_pm = lambda_pm;
    const FrozenMasks fm = f.freeze(w, f.pose);
    const LossGradient g = loss_gradient(f.pair.target, f.pair.source, f.pair.target_depth, f.pair.source_depth,
                                         f.pose, f.k, w, {}, &fm);
    Rng rng(99);
    int checked = 0;
    while (checked < 10) {
      const int x = 2 + static_cast<int>(rng.below(f.k.width - 4));
      const int y = 2 + static_cast<int>(rng.below(f.k.height - 4));
      if (!fm.validity(x, y)) continue;
      const double h = 1e-6 * f.pair.target_depth.depth(x, y);
      DepthMap up = f.pair.target_depth, down = f.pair.target_depth;
      up.depth(x, y) += h;
      down.depth(x, y) -= h;
      const double fd = (f.loss(w, fm, f.pose, up) - f.loss(w, fm, f.pose, down)) / (2 * h);
      EXPECT_LT(relative_error(g.depth(x, y), fd), 1e-3)
          << "lambda " << lambda_pm << " pixel " << x << "," << y << ": " << g.depth(x, y) << " vs " << fd;
      ++checked;
    }
  }
}

TEST(LossGradient, VanishesAtTheTruePoseOfALatticeAlignedPair) {
  // Fronto-parallel plane at 5 m, sideways motion of exactly two pixels: the
  // warp lands on lattice points, so the pair is noise-free after warping.
  const Intrinsics k = Intrinsics::centered(160, 120);
  SceneSpec scene;
  scene.depth_model = PlaneModel{};
  const auto p = render_pair(scene, k, PoseSE3::identity(), se3_exp(make_twist({0.0, 0.0, 0.0}, {0.125, 0.0, 0.0})));
  const LossWeights w;
  auto grad_at = [&](const PoseSE3& t) {
    return loss_gradient(p.target, p.source, p.target_depth, p.source_depth, t, k, w).twist.norm();
  };
  const double at_truth = grad_at(p.t_to_s);
  const double perturbed =
      grad_at(se3_exp(make_twist({deg2rad(0.3), deg2rad(0.3), 0.0}, {0.015, 0.01, 0.015})) * p.t_to_s);
  EXPECT_LT(at_truth, 1e-3 * perturbed) << at_truth << " vs " << perturbed;
}

// On a generic render the warp interpolates between pixels. The interpolation
// error acts like image noise and leaves a small gradient at the truth.
TEST(LossGradient, InterpolationLeavesOnlyASmallGradientAtTheTruePose) {
  const Intrinsics k = Intrinsics::centered(320, 240);
  SceneSpec scene;
  scene.seed = 1;
  const auto p = render_pair(scene, k, PoseSE3::identity(),
                             se3_exp(make_twist({0.0, deg2rad(1.0), 0.0}, {0.05, 0.0, 0.0})));
  const LossWeights w;
  auto grad_at = [&](const PoseSE3& t) {
    return loss_gradient(p.target, p.source, p.target_depth, p.source_depth, t, k, w).twist.norm();
  };
  const double at_truth = grad_at(p.t_to_s);
  const double perturbed =
      grad_at(se3_exp(make_twist({deg2rad(0.3), deg2rad(0.3), 0.0}, {0.015, 0.01, 0.015})) * p.t_to_s);
  EXPECT_LT(at_truth, 1e-2 * perturbed) << at_truth << " vs " << perturbed;
}
