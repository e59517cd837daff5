#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace tslam;
using tslam::testing::render_pair;

namespace {

Intrinsics small_camera() { return Intrinsics::centered(64, 48); }

bool pose_near(const PoseSE3& a, const PoseSE3& b, double tol) {
  return (a.rotation() - b.rotation()).cwiseAbs().maxCoeff() < tol &&
         (a.translation() - b.translation()).cwiseAbs().maxCoeff() < tol;
}

}  // namespace

TEST(Se3, ExpOfZeroIsIdentity) {
  const PoseSE3 t = se3_exp(Twist::Zero());
  EXPECT_TRUE(t.rotation().isIdentity(0.0));
  EXPECT_TRUE(t.translation().isZero(0.0));
}

TEST(Se3, ExpOfPureTranslation) {
  const PoseSE3 t = se3_exp(make_twist({0, 0, 0}, {1, 2, 3}));
  EXPECT_TRUE(t.rotation().isIdentity(0.0));
  EXPECT_EQ(t.translation(), Eigen::Vector3d(1, 2, 3));
}

TEST(Se3, LogExpRoundTripOnRandomTwists) {
  Rng rng(11);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
    axis.normalize();
    const Eigen::Vector3d omega = axis * rng.uniform(0.0, 3.0);
    const Eigen::Vector3d v(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
    const Twist xi = make_twist(omega, v);
    worst = std::max(worst, (se3_log(se3_exp(xi)) - xi).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(Se3, SmallAngleSeriesBranchRoundTrips) {
  for (double a : {0.0, 1e-12, 1e-9, 1e-7, 1e-5}) {
    const Twist xi = make_twist({a, -0.5 * a, 0.25 * a}, {0.3, -0.2, 0.1});
    EXPECT_LT((se3_log(se3_exp(xi)) - xi).cwiseAbs().maxCoeff(), 1e-12) << a;
  }
}

TEST(Se3, LogNearPiIsADomainError) {
  const PoseSE3 t = se3_exp(make_twist({std::numbers::pi - 1e-8, 0, 0}, {0, 0, 0}));
  EXPECT_THROW(se3_log(t), DomainError);
  const PoseSE3 half = se3_exp(make_twist({0, std::numbers::pi, 0}, {1, 0, 0}));
  EXPECT_THROW(se3_log(half), DomainError);
}

TEST(Se3, ExpProducesValidRotationsAndInverses) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const PoseSE3 t = se3_exp(tslam::testing::random_twist(rng, 1.0, 3.0));
    const Eigen::Matrix3d& r = t.rotation();
    EXPECT_LT((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-9);
    EXPECT_TRUE(pose_near(t * t.inverse(), PoseSE3::identity(), 1e-9));
  }
}

TEST(Se3, AdjointMovesPerturbationAcrossThePose) {
  // exp(Ad_T xi) T == T exp(xi)
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    const PoseSE3 t = se3_exp(tslam::testing::random_twist(rng, 0.8, 2.0));
    const Twist xi = tslam::testing::random_twist(rng, 0.3, 0.5);
    EXPECT_TRUE(pose_near(se3_exp(adjoint(t) * xi) * t, t * se3_exp(xi), 1e-12));
  }
}

TEST(ProjectPixel, IdentityTransformIsAFixedPoint) {
  const Intrinsics k = small_camera();
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const PixelCoord p{rng.uniform(0, 63), rng.uniform(0, 47)};
    const double depth = rng.uniform(0.1, 50.0);
    const Projection pr = project_pixel(p, depth, k, PoseSE3::identity());
    ASSERT_TRUE(pr.valid);
    EXPECT_NEAR(pr.pixel.u, p.u, 1e-12);
    EXPECT_NEAR(pr.pixel.v, p.v, 1e-12);
    EXPECT_NEAR(pr.z, depth, 1e-12);
  }
}

TEST(ProjectPixel, LateralShiftScalesWithInverseDepth) {
  const Intrinsics k{100.0, 100.0, 0.0, 0.0, 64, 48};
  const PoseSE3 t = PoseSE3::translation_only({0.1, 0.0, 0.0});
  const Projection at1 = project_pixel({0, 0}, 1.0, k, t);
  ASSERT_TRUE(at1.valid);
  // u' = fx * tx / z'
  EXPECT_NEAR(at1.pixel.u, 100.0 * 0.1 / 1.0, 1e-12);
  EXPECT_NEAR(at1.pixel.v, 0.0, 1e-12);
  const Projection at2 = project_pixel({0, 0}, 2.0, k, t);
  EXPECT_NEAR(at2.pixel.u, 100.0 * 0.1 / 2.0, 1e-12);
  EXPECT_NEAR(at2.pixel.u, 0.5 * at1.pixel.u, 1e-12);
}

TEST(ProjectPixel, PointBehindCameraIsInvalid) {
  const Intrinsics k = small_camera();
  const Projection pr = project_pixel({10, 10}, 1.0, k, PoseSE3::translation_only({0, 0, -1.0}));
  EXPECT_FALSE(pr.valid);
  EXPECT_NEAR(pr.z, 0.0, 1e-15);
  EXPECT_FALSE(project_pixel({10, 10}, 1.0, k, PoseSE3::translation_only({0, 0, -2.0})).valid);
}

TEST(Intrinsics, ValidateRejectsBadValues) {
  EXPECT_NO_THROW(small_camera().validate());
  EXPECT_THROW((Intrinsics{0.0, 1.0, 1.0, 1.0, 4, 4}.validate()), InvalidArgument);
  EXPECT_THROW((Intrinsics{1.0, 1.0, 4.0, 1.0, 4, 4}.validate()), InvalidArgument);
  EXPECT_THROW((Intrinsics{1.0, 1.0, 1.0, -0.5, 4, 4}.validate()), InvalidArgument);
}

TEST(BilinearSample, LatticePointIsExact) {
  Rng rng(1);
  const ImageGray img = tslam::testing::random_image(8, 8, rng);
  const SampleResult s = bilinear_sample(img, {3, 5});
  ASSERT_TRUE(s.valid);
  EXPECT_EQ(s.value, img(3, 5));
  EXPECT_EQ(s.weights[0], 1.0);
  EXPECT_EQ(s.weights[1], 0.0);
  EXPECT_EQ(s.weights[2], 0.0);
  EXPECT_EQ(s.weights[3], 0.0);
}

TEST(BilinearSample, CenterOfBlockAverages) {
  const ImageGray img(2, 2, std::vector<double>{0.0, 0.0, 1.0, 1.0});
  const SampleResult s = bilinear_sample(img, {0.5, 0.5});
  ASSERT_TRUE(s.valid);
  EXPECT_DOUBLE_EQ(s.value, 0.5);
}

TEST(BilinearSample, OutOfBoundsIsInvalid) {
  const ImageGray img(4, 4, 0.7);
  for (PixelCoord p : {PixelCoord{-0.5, 0}, PixelCoord{0, -1e-9}, PixelCoord{3.0001, 1}, PixelCoord{1, 3.5}}) {
    const SampleResult s = bilinear_sample(img, p);
    EXPECT_FALSE(s.valid);
    EXPECT_EQ(s.value, 0.0);
  }
  // The far edge itself is still inside.
  EXPECT_TRUE(bilinear_sample(img, {3.0, 3.0}).valid);
  EXPECT_DOUBLE_EQ(bilinear_sample(img, {3.0, 3.0}).value, 0.7);
}

TEST(BilinearSample, WeightsAreAConvexCombinationMatchingTheFormula) {
  Rng rng(2);
  const ImageGray img = tslam::testing::random_image(9, 7, rng);
  for (int i = 0; i < 2000; ++i) {
    const PixelCoord p{rng.uniform(0, 8), rng.uniform(0, 6)};
    const SampleResult s = bilinear_sample(img, p);
    ASSERT_TRUE(s.valid);
    double sum = 0.0;
    for (double w : s.weights) {
      EXPECT_GE(w, 0.0);
      sum += w;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    // Direct evaluation from the four neighbors.
    const int x0 = std::min(static_cast<int>(p.u), 7), y0 = std::min(static_cast<int>(p.v), 5);
    const double a = p.u - x0, b = p.v - y0;
    const double expect = (1 - a) * (1 - b) * img(x0, y0) + a * (1 - b) * img(x0 + 1, y0) +
                          (1 - a) * b * img(x0, y0 + 1) + a * b * img(x0 + 1, y0 + 1);
    EXPECT_NEAR(s.value, expect, 1e-14);
  }
}

TEST(BilinearSample, DepthSampleNeedsAllNeighborsValid) {
  DepthMap d(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) d.set(x, y, 2.0);
  d.set(2, 2, 0.0);
  EXPECT_TRUE(bilinear_sample(d, {0.5, 0.5}).valid);
  EXPECT_FALSE(bilinear_sample(d, {1.5, 1.5}).valid);
}

TEST(InverseWarp, IdentityReproducesTheSource) {
  const Intrinsics k = small_camera();
  SceneSpec scene;
  const auto [img, depth] = render_view(scene, k, PoseSE3::identity());
  const WarpResult w = inverse_warp(img, depth, PoseSE3::identity(), k, depth);
  double worst = 0.0;
  std::size_t interior_valid = 0;
  for (int y = 1; y + 1 < k.height; ++y) {
    for (int x = 1; x + 1 < k.width; ++x) {
      ASSERT_TRUE(w.validity(x, y));
      ++interior_valid;
      worst = std::max(worst, std::abs(w.synthesized(x, y) - img(x, y)));
    }
  }
  EXPECT_EQ(interior_valid, static_cast<std::size_t>((k.width - 2) * (k.height - 2)));
  EXPECT_LT(worst, 1e-12);
}

TEST(InverseWarp, RenderedPairAtTruePoseIsConsistent) {
  const Intrinsics k = Intrinsics::centered(160, 120);
  SceneSpec scene;
  scene.seed = 21;
  const PoseSE3 wt = PoseSE3::translation_only({0.2, 0.0, 0.1});
  const PoseSE3 ws = wt * se3_exp(make_twist({0.0, deg2rad(1.0), 0.0}, {0.05, 0.0, 0.0}));
  const auto p = render_pair(scene, k, wt, ws);
  const WarpResult w = inverse_warp(p.source, p.target_depth, p.t_to_s, k, p.source_depth);
  EXPECT_GT(count_true(w.validity), w.validity.size() / 2);
  EXPECT_LT(tslam::testing::masked_mean_abs(w.synthesized, p.target, w.validity), 0.01);
}

TEST(InverseWarp, CameraPushedPastTheSceneSeesNothing) {
  const Intrinsics k = small_camera();
  SceneSpec scene;
  scene.depth_model = PlaneModel{{0.0, 0.0, 1.0}, 5.0};
  const auto [img, depth] = render_view(scene, k, PoseSE3::identity());
  // Every scene point lies at z = 5 < 10 in the target frame; in the source
  // frame it ends up at z - 10 < 0.
  const WarpResult w = inverse_warp(img, depth, PoseSE3::translation_only({0, 0, -10.0}), k, depth);
  EXPECT_EQ(count_true(w.validity), 0u);
}

TEST(InverseWarp, ShapeMismatchIsReported) {
  const Intrinsics k = small_camera();
  const ImageGray img(k.width, k.height, 0.5);
  const DepthMap good = DepthMap::from_depths(Raster<double>(k.width, k.height, 3.0));
  const DepthMap bad = DepthMap::from_depths(Raster<double>(k.width - 1, k.height, 3.0));
  EXPECT_THROW(inverse_warp(img, bad, PoseSE3::identity(), k, good), ShapeError);
  EXPECT_THROW(inverse_warp(img, good, PoseSE3::identity(), k, bad), ShapeError);
  EXPECT_THROW(inverse_warp(ImageGray(3, 3), good, PoseSE3::identity(), k, good), ShapeError);
}

TEST(InverseWarp, RastersShareDimensionsAndInvalidPixelsAreClean) {
  const Intrinsics k = small_camera();
  SceneSpec scene;
  const auto p = render_pair(scene, k, PoseSE3::identity(),
                             se3_exp(make_twist({0.0, deg2rad(4.0), 0.0}, {0.3, 0.0, 0.0})));
  const WarpResult w = inverse_warp(p.source, p.target_depth, p.t_to_s, k, p.source_depth);
  EXPECT_TRUE(w.synthesized.same_shape(w.validity));
  EXPECT_TRUE(w.synthesized.same_shape(w.projected_depth.depth));
  EXPECT_TRUE(w.synthesized.same_shape(w.sampled_depth.depth));
  std::size_t invalid = 0;
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      if (w.validity(x, y)) {
        EXPECT_TRUE(bilinear_sample(p.source, {w.source_u(x, y), w.source_v(x, y)}).valid);
        EXPECT_GT(w.projected_depth.depth(x, y), 0.0);
      } else {
        ++invalid;
        EXPECT_EQ(w.synthesized(x, y), 0.0);
      }
    }
  }
  EXPECT_GT(invalid, 0u);
}

TEST(InverseWarp, ComposedPoseMatchesSequentialWarps) {
  const Intrinsics k = Intrinsics::centered(160, 120);
  SceneSpec scene;
  scene.seed = 4;
  const SyntheticScene s(scene);
  const PoseSE3 wt = PoseSE3::identity();
  const PoseSE3 wm = se3_exp(make_twist({0.0, deg2rad(0.5), 0.0}, {0.03, 0.0, 0.02}));
  const PoseSE3 ws = wm * se3_exp(make_twist({deg2rad(0.3), 0.0, 0.0}, {0.02, 0.01, 0.0}));
  const auto [it, dt] = s.render(k, wt);
  const auto [im, dm] = s.render(k, wm);
  const auto [is, ds] = s.render(k, ws);
  const PoseSE3 t_to_m = wm.inverse() * wt, m_to_s = ws.inverse() * wm;

  const WarpResult direct = inverse_warp(is, dt, m_to_s * t_to_m, k, ds);
  const WarpResult to_mid = inverse_warp(is, dm, m_to_s, k, ds);
  // Only source pixels that produced valid mid-frame samples may be read.
  DepthMap mid_valid = dm;
  for (std::size_t i = 0; i < mid_valid.valid.size(); ++i) mid_valid.valid[i] &= to_mid.validity[i];
  const WarpResult chained = inverse_warp(to_mid.synthesized, dt, t_to_m, k, mid_valid);

  Mask both(k.width, k.height, 0);
  for (std::size_t i = 0; i < both.size(); ++i) both[i] = direct.validity[i] && chained.validity[i];
  EXPECT_GT(count_true(both), both.size() / 2);
  EXPECT_LT(tslam::testing::masked_mean_abs(direct.synthesized, chained.synthesized, both), 0.01);
}

TEST(InverseWarp, OutputDoesNotDependOnThreadCount) {
  const Intrinsics k = Intrinsics::centered(96, 72);
  SceneSpec scene;
  const auto p = render_pair(scene, k, PoseSE3::identity(),
                             se3_exp(make_twist({0.01, 0.02, 0.0}, {0.05, 0.0, 0.02})));
  set_num_threads(1);
  const WarpResult a = inverse_warp(p.source, p.target_depth, p.t_to_s, k, p.source_depth);
  set_num_threads(4);
  const WarpResult b = inverse_warp(p.source, p.target_depth, p.t_to_s, k, p.source_depth);
  set_num_threads(1);
  EXPECT_EQ(a.synthesized, b.synthesized);
  EXPECT_EQ(a.validity, b.validity);
  EXPECT_EQ(a.sampled_depth, b.sampled_depth);
}

TEST(Backproject, PrincipalRayLandsOnTheOpticalAxis) {
  const Intrinsics k{50.0, 50.0, 4.0, 3.0, 9, 7};
  DepthMap d(9, 7);
  d.set(4, 3, 2.5);
  const auto pts = backproject_depth(d, k, PoseSE3::identity());
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_EQ(pts[0], Eigen::Vector3d(0.0, 0.0, 2.5));
}

TEST(Backproject, OnePointPerValidPixel) {
  const Intrinsics k = Intrinsics::centered(10, 8);
  DepthMap d(10, 8);
  const int xs[7] = {0, 1, 9, 4, 5, 2, 7}, ys[7] = {0, 7, 3, 4, 1, 6, 2};
  for (int i = 0; i < 7; ++i) d.set(xs[i], ys[i], 1.0 + i);
  EXPECT_EQ(backproject_depth(d, k, PoseSE3::identity()).size(), 7u);
}

TEST(Backproject, ProjectionRoundTripsToTheSourcePixel) {
  const Intrinsics k = Intrinsics::centered(32, 24);
  Rng rng(8);
  const DepthMap d = tslam::testing::random_depth(32, 24, rng, 0.5, 30.0);
  const auto pts = backproject_depth(d, k, PoseSE3::identity());
  ASSERT_EQ(pts.size(), d.valid_count());
  std::size_t i = 0;
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 32; ++x, ++i) {
      const Projection pr = project_pixel(k.project(pts[i]), pts[i].z(), k, PoseSE3::identity());
      ASSERT_TRUE(pr.valid);
      EXPECT_NEAR(pr.pixel.u, x, 1e-9);
      EXPECT_NEAR(pr.pixel.v, y, 1e-9);
    }
  }
}

TEST(Backproject, WorldPoseIsApplied) {
  const Intrinsics k{50.0, 50.0, 4.0, 3.0, 9, 7};
  DepthMap d(9, 7);
  d.set(4, 3, 2.0);
  const PoseSE3 world = se3_exp(make_twist({0.0, std::numbers::pi / 2, 0.0}, {0, 0, 0}));
  const PoseSE3 shifted(world.rotation(), {1.0, 2.0, 3.0});
  const auto pts = backproject_depth(d, k, shifted);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_TRUE(pts[0].isApprox(shifted * Eigen::Vector3d(0, 0, 2.0), 1e-12));
  EXPECT_NEAR(pts[0].x(), 1.0 + 2.0, 1e-12);
}
