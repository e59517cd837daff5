#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <sstream>

#include "support.hpp"

using namespace tslam;
using tslam::testing::scratch_dir;

namespace {

template <typename F>
void expect_invalid(F&& f, const std::string& fragment) {
  try {
    f();
    FAIL() << "expected InvalidArgument containing '" << fragment << "'";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
}

/// Minimal dataset with two frames whose files exist.
std::filesystem::path tiny_dataset(const std::string& name) {
  const auto dir = scratch_dir(name);
  write_pgm16_file((dir / "a.pgm").string(), Raster<std::uint16_t>(4, 3, 100));
  write_pgm16_file((dir / "b.pgm").string(), Raster<std::uint16_t>(4, 3, 200));
  return dir;
}

}  // namespace

TEST(Pgm, SixteenBitRoundTripIsExact) {
  Rng rng(1);
  Raster<std::uint16_t> img(7, 5);
  for (auto& v : img) v = static_cast<std::uint16_t>(rng.below(65536));
  std::stringstream ss;
  write_pgm16(ss, img);
  EXPECT_EQ(read_pgm(ss), img);
}

TEST(Pgm, EightBitIsPromotedToTheFullRange) {
  std::stringstream ss;
  ss << "P5\n# comment\n3 1\n255\n";
  const unsigned char px[3] = {0, 1, 255};
  ss.write(reinterpret_cast<const char*>(px), 3);
  const auto img = read_pgm(ss);
  EXPECT_EQ(img[0], 0);
  EXPECT_EQ(img[1], 257);
  EXPECT_EQ(img[2], 65535);

  std::stringstream s15;
  s15 << "P5 2 1 15\n";
  const unsigned char px15[2] = {15, 5};
  s15.write(reinterpret_cast<const char*>(px15), 2);
  const auto img15 = read_pgm(s15);
  EXPECT_EQ(img15[0], 65535);
  EXPECT_EQ(img15[1], 21845);
}

TEST(Pgm, MalformedInputIsRejected) {
  const auto fails = [](const std::string& text, const std::string& fragment) {
    expect_invalid(
        [&] {
          std::istringstream is(text);
          read_pgm(is, "img.pgm");
        },
        fragment);
  };
  fails("P2\n1 1\n255\n0", "not a binary PGM");
  fails("P5\nx 1\n255\n", "malformed PGM header");
  fails("P5\n0 1\n255\n", "bad PGM dimensions");
  fails("P5\n1 1\n70000\n", "bad PGM maxval");
  fails("P5\n2 2\n255\nab", "truncated");
  EXPECT_THROW(read_pgm_file("/nonexistent/file.pgm"), InvalidArgument);
}

TEST(Pgm, QuantizedImagesRoundTripToWithinHalfACount) {
  Rng rng(2);
  ImageGray img(9, 4);
  for (auto& v : img) v = rng.uniform();
  img[0] = -0.5;
  img[1] = 1.5;
  const ImageGray back = counts_to_unit(quantize_image(img));
  EXPECT_EQ(back[0], 0.0);
  EXPECT_EQ(back[1], 1.0);
  for (std::size_t i = 2; i < img.size(); ++i) EXPECT_NEAR(back[i], img[i], 0.5 / 65535.0 + 1e-15);
}

TEST(DepthFile, EncodesMillimetersWithZeroForInvalid) {
  DepthMap d(4, 1);
  d.set(0, 0, 1.2344);
  d.set(1, 0, 65.535);
  d.set(2, 0, 0.0002);  // below half a count, still valid
  const auto counts = encode_depth(d);
  EXPECT_EQ(counts[0], 1234);
  EXPECT_EQ(counts[1], 65535);
  EXPECT_EQ(counts[2], 1);
  EXPECT_EQ(counts[3], 0);
  const DepthMap back = decode_depth(counts);
  EXPECT_TRUE(back.is_valid(2, 0));
  EXPECT_FALSE(back.is_valid(3, 0));
  EXPECT_DOUBLE_EQ(back.depth(0, 0), 1.234);
  d.set(3, 0, 70.0);
  EXPECT_THROW(encode_depth(d), InvalidArgument);
}

TEST(DepthFile, FileRoundTripKeepsValidity) {
  const auto dir = scratch_dir("depth_file");
  Rng rng(3);
  DepthMap d(6, 5);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x) {
      if (rng.uniform() < 0.8) d.set(x, y, rng.uniform(0.5, 60.0));
    }
  const std::string path = (dir / "d.pgm").string();
  write_depth_file(path, d);
  const DepthMap back = read_depth_file(path);
  EXPECT_EQ(back.valid, d.valid);
  for (std::size_t i = 0; i < d.depth.size(); ++i) {
    if (!d.valid[i]) continue;
    EXPECT_NEAR(back.depth[i], d.depth[i], 0.5 * kDepthQuantum + 1e-12);
  }
}

TEST(Ply, RoundTripKeepsFloatPrecision) {
  Rng rng(4);
  std::vector<CloudPoint> pts(50);
  for (auto& p : pts) {
    p.position = {rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-20, 20)};
    p.intensity = rng.uniform();
  }
  std::stringstream ss;
  write_ply(ss, pts);
  const PlyContents c = read_ply(ss);
  EXPECT_EQ(c.header_count, 50u);
  ASSERT_EQ(c.points.size(), 50u);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    // Shortest float text parses back to the same float.
    for (int k = 0; k < 3; ++k) EXPECT_EQ(float(c.points[i].position[k]), float(pts[i].position[k]));
    EXPECT_EQ(float(c.points[i].intensity), float(pts[i].intensity));
  }
}

TEST(Ply, MalformedInputIsRejected) {
  const auto fails = [](const std::string& text, const std::string& fragment) {
    expect_invalid(
        [&] {
          std::istringstream is(text);
          read_ply(is, "c.ply");
        },
        fragment);
  };
  fails("obj\n", "not a PLY");
  fails("ply\nformat binary_little_endian 1.0\nend_header\n", "only ASCII");
  fails("ply\nformat ascii 1.0\nend_header\n", "missing vertex");
  fails("ply\nformat ascii 1.0\nelement vertex 1\nend_header\n1 2 x 4\n", "malformed vertex");
}

TEST(Config, ParsesKeysValuesAndComments) {
  std::istringstream is("# header\n\n  odometry.max_iterations = 7  # trailing\nloop.threshold=0.9\n");
  const auto entries = parse_config(is);
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[0].key, "odometry.max_iterations");
  EXPECT_EQ(entries[0].value, "7");
  EXPECT_EQ(entries[0].line, 3);
  EXPECT_EQ(entries[1].value, "0.9");
}

TEST(Config, SyntaxErrorsNameTheLine) {
  const auto fails = [](const std::string& text, const std::string& fragment) {
    expect_invalid(
        [&] {
          std::istringstream is(text);
          parse_config(is, "run.cfg");
        },
        fragment);
  };
  fails("a.b = 1\nno equals sign\n", "run.cfg:2");
  fails("nodot = 1\n", "run.cfg:1");
  fails("a.b =\n", "empty value");
  fails(".b = 1\n", "not 'section.key'");
}

TEST(Config, AppliesValuesOverTheDefaults) {
  std::istringstream is(
      "odometry.max_iterations = 7\nloop.threshold = 0.9\neval.alignment = rigid\nenhance.enabled = off\n"
      "loop.features = file\npipeline.seed = 18446744073709551615\n");
  const PipelineConfig c = config_from_entries(parse_config(is));
  EXPECT_EQ(c.odometry.max_iterations, 7);
  EXPECT_EQ(c.loop.threshold, 0.9);
  EXPECT_EQ(c.eval.alignment, Alignment::Rigid);
  EXPECT_FALSE(c.pipeline.enhance_enabled);
  EXPECT_EQ(c.pipeline.features, FeatureSource::File);
  EXPECT_EQ(c.seed, 18446744073709551615ULL);
  EXPECT_EQ(c.loss.lambda_pm, LossWeights{}.lambda_pm);
}

TEST(Config, BadEntriesNameTheLine) {
  const auto fails = [](const std::string& text, const std::string& fragment) {
    expect_invalid(
        [&] {
          std::istringstream is(text);
          config_from_entries(parse_config(is, "run.cfg"), "run.cfg");
        },
        fragment);
  };
  fails("odometry.max_iterations = 3\nodometry.bogus = 1\n", "run.cfg:2: unknown config key 'odometry.bogus'");
  fails("loop.threshold = 0.5\nloop.threshold = 0.6\n", "run.cfg:2: duplicate config key");
  fails("loop.threshold = high\n", "run.cfg:1");
  fails("odometry.pyramid_levels = 2.5\n", "run.cfg:1");
  fails("eval.alignment = affine\n", "run.cfg:1");
  fails("enhance.enabled = maybe\n", "run.cfg:1");
  fails("pipeline.seed = -1\n", "run.cfg:1");
  fails("odometry.max_iterations = 99999999999\n", "out of range");
  // Value-level validation runs after all keys are applied.
  fails("loss.lambda_pm = 1.5\n", "run.cfg");
}

TEST(Config, WrittenConfigReloadsExactly) {
  PipelineConfig c;
  c.loss.lambda_pm = 0.1 + 0.2;  // not exactly representable as short text
  c.loop.threshold = 1.0 / 3.0;
  c.odometry.pyramid_levels = 3;
  c.eval.alignment = Alignment::None;
  c.pipeline.features = FeatureSource::File;
  c.seed = 42;
  std::stringstream ss;
  write_config(ss, c);
  const PipelineConfig back = config_from_entries(parse_config(ss));
  std::stringstream again;
  write_config(again, back);
  EXPECT_EQ(ss.str(), again.str());
  EXPECT_EQ(back.loss.lambda_pm, c.loss.lambda_pm);
  EXPECT_EQ(back.loop.threshold, c.loop.threshold);
  const std::string text = ss.str();
  EXPECT_EQ(config_keys().size(), static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')));
}

TEST(Config, FormatDoubleRoundTrips) {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    double v;
    const std::uint64_t bits = rng.next_u64();
    std::memcpy(&v, &bits, sizeof v);
    if (!std::isfinite(v)) continue;
    EXPECT_EQ(parse_double(format_double(v), "v"), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_THROW(parse_double("1.0x", "v"), InvalidArgument);
  EXPECT_THROW(parse_int("", "v"), InvalidArgument);
}

TEST(Manifest, WrittenManifestReadsBack) {
  const auto dir = tiny_dataset("manifest_rt");
  write_text(dir / "gt.txt", "0 0 0 0 0 0 0 1\n");
  DatasetManifest m;
  m.path = dir / "manifest.txt";
  m.intrinsics = Intrinsics::centered(4, 3);
  m.intrinsics.fx = 2.25;
  EnhanceParams e;
  e.detail_gain = 2.5;
  m.enhance = ManifestEnhance{true, e};
  m.groundtruth = "gt.txt";
  m.frames = {{0.0, "a.pgm", "b.pgm"}, {0.1, "b.pgm", std::nullopt}};
  {
    std::ofstream os(m.path);
    write_manifest(os, m);
  }
  const DatasetManifest back = read_manifest_file(m.path.string());
  EXPECT_EQ(back.intrinsics.fx, 2.25);
  EXPECT_EQ(back.intrinsics.width, 4);
  ASSERT_TRUE(back.enhance.has_value());
  EXPECT_TRUE(back.enhance->enabled);
  EXPECT_EQ(back.enhance->params.detail_gain, 2.5);
  ASSERT_EQ(back.frames.size(), 2u);
  EXPECT_EQ(back.frames[0].depth, std::optional<std::string>("b.pgm"));
  EXPECT_FALSE(back.frames[1].depth.has_value());
  EXPECT_EQ(back.resolve("a.pgm"), dir / "a.pgm");
  EXPECT_FALSE(back.features.has_value());
}

TEST(Manifest, EnhanceOffAndAbsentAreDistinct) {
  const auto dir = tiny_dataset("manifest_enhance");
  write_text(dir / "m1.txt", "intrinsics 2 2 1.5 1 4 3\nenhance off\nframe 0 a.pgm -\n");
  write_text(dir / "m2.txt", "intrinsics 2 2 1.5 1 4 3\nframe 0 a.pgm -\n");
  const DatasetManifest off = read_manifest_file((dir / "m1.txt").string());
  ASSERT_TRUE(off.enhance.has_value());
  EXPECT_FALSE(off.enhance->enabled);
  EXPECT_FALSE(read_manifest_file((dir / "m2.txt").string()).enhance.has_value());
}

TEST(Manifest, ErrorsNameTheFileAndLine) {
  const auto dir = tiny_dataset("manifest_errors");
  const auto fails = [&](const std::string& text, const std::string& fragment) {
    const auto p = dir / "m.txt";
    write_text(p, text);
    expect_invalid([&] { read_manifest_file(p.string()); }, fragment);
  };
  const std::string k = "intrinsics 2 2 1.5 1 4 3\n";
  fails("frame 0 a.pgm -\n", "missing intrinsics");
  fails(k + "frame 0 a.pgm -\nbogus 1\n", "m.txt:3: unknown record 'bogus'");
  fails(k + "frame 0.1 a.pgm -\nframe 0.1 b.pgm -\n", "m.txt:3: timestamps must be strictly increasing");
  fails(k + "frame 0 a.pgm\n", "m.txt:2");
  fails(k + "frame x a.pgm -\n", "m.txt:2");
  fails(k + "frame 0 missing.pgm -\n", "'missing.pgm' does not exist");
  fails("intrinsics 2 2 9 1 4 3\n", "m.txt:1: intrinsics: principal point");
  fails(k + "enhance 0.9 0.1 1 1 0 1\n", "m.txt:2");
  fails(k + "groundtruth nothere.txt\n", "does not exist");
  expect_invalid([&] { read_manifest_file((dir / "absent.txt").string()); }, "cannot open manifest");
}

TEST(Features, AreNormalizedWithWarnings) {
  const auto dir = scratch_dir("features");
  write_text(dir / "f.txt", "# feats\n0.6 0.8 0\n3 0 4\n");
  const FeatureLoad f = read_features_file((dir / "f.txt").string());
  ASSERT_EQ(f.features.size(), 2u);
  EXPECT_NEAR(f.features[1][0], 0.6, 1e-15);
  EXPECT_NEAR(f.features[1][2], 0.8, 1e-15);
  ASSERT_EQ(f.warnings.size(), 1u);
  EXPECT_NE(f.warnings[0].find("f.txt:3"), std::string::npos);

  write_text(dir / "g.txt", "1 0 0\n1 0\n");
  expect_invalid([&] { read_features_file((dir / "g.txt").string()); }, "g.txt:2");
  write_text(dir / "h.txt", "0 0 0\n");
  expect_invalid([&] { read_features_file((dir / "h.txt").string()); }, "h.txt:1");
}
