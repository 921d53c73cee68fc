#include "oracles.hpp"
#include "test_util.hpp"

#include <relit/assets_io.hpp>
#include <relit/dataset.hpp>
#include <relit/png_io.hpp>
#include <relit/rgbe.hpp>

#include <gtest/gtest.h>

#include <fstream>

using namespace relit;
using testutil::TempDir;

namespace {

void write_png_raw(const fs::path& path, int w, int h, png_uint_32 format, const void* data) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = w;
  img.height = h;
  img.format = format;
  ASSERT_TRUE(png_image_write_to_file(&img, path.c_str(), 0, data, 0, nullptr));
}

Camera test_camera(double shift) {
  return Camera::look_at(Vec3(3 + shift, 0.5, 1), Vec3(0, 0, 0.3), Vec3::UnitZ(), 100.25, 101.5, 40.5, 39.0,
                         0.0123 * shift);
}

}  // namespace

TEST(Png, SinglePixel) {
  TempDir dir("png1");
  TonemappedImage img(1, 1);
  img.at(0, 0, 0) = 255;
  write_png_rgb(img, dir / "p.png");
  const auto back = read_png_rgb(dir / "p.png");
  ASSERT_EQ(back.width(), 1);
  EXPECT_EQ(back.at(0, 0, 0), 255);
  EXPECT_EQ(back.at(0, 0, 1), 0);
  EXPECT_EQ(back.at(0, 0, 2), 0);
}

TEST(Png, RoundTripRandomImages) {
  TempDir dir("png100");
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const auto img = testutil::random_tonemapped(32, 32, rng);
    write_png_rgb(img, dir / "r.png");
    EXPECT_TRUE(read_png_rgb(dir / "r.png") == img) << "image " << i;
  }
}

TEST(Png, RejectsSixteenBitAlphaAndGray) {
  TempDir dir("pngbad");
  std::vector<std::uint16_t> deep(4 * 4 * 3, 1000);
  write_png_raw(dir / "deep.png", 4, 4, PNG_FORMAT_LINEAR_RGB, deep.data());
  try {
    read_png_rgb(dir / "deep.png");
    FAIL() << "16-bit PNG accepted";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported bit depth"), std::string::npos);
  }
  std::vector<std::uint8_t> rgba(4 * 4 * 4, 200);
  write_png_raw(dir / "rgba.png", 4, 4, PNG_FORMAT_RGBA, rgba.data());
  EXPECT_THROW(read_png_rgb(dir / "rgba.png"), ValidationError);
  std::vector<std::uint8_t> gray(16, 9);
  write_png_raw(dir / "gray.png", 4, 4, PNG_FORMAT_GRAY, gray.data());
  EXPECT_THROW(read_png_rgb(dir / "gray.png"), ValidationError);
  EXPECT_THROW(read_png_rgb(dir / "missing.png"), IoError);
}

TEST(Png, MaskThresholdAndLayouts) {
  TempDir dir("mask");
  std::vector<std::uint8_t> gray = {0, 127, 128, 255};
  write_png_raw(dir / "g.png", 4, 1, PNG_FORMAT_GRAY, gray.data());
  const Mask g = read_mask_png(dir / "g.png");
  EXPECT_FALSE(g(0, 0));
  EXPECT_FALSE(g(1, 0));
  EXPECT_TRUE(g(2, 0));
  EXPECT_TRUE(g(3, 0));
  std::vector<std::uint8_t> rgb = {200, 0, 0, 10, 255, 255};
  write_png_raw(dir / "c.png", 2, 1, PNG_FORMAT_RGB, rgb.data());
  const Mask c = read_mask_png(dir / "c.png");
  EXPECT_TRUE(c(0, 0));
  EXPECT_FALSE(c(1, 0));
  std::mt19937_64 rng(3);
  const Mask m = testutil::random_mask(17, 9, rng);
  write_mask_png(m, dir / "m.png");
  EXPECT_TRUE(read_mask_png(dir / "m.png") == m);
}

TEST(Rgbe, ZeroAndOne) {
  EXPECT_EQ(encode_rgbe(0, 0, 0), (RgbeBytes{0, 0, 0, 0}));
  EXPECT_TRUE((decode_rgbe({0, 0, 0, 0}) == Rgb::Zero()).all());
  EXPECT_EQ(encode_rgbe(1, 1, 1), (RgbeBytes{128, 128, 128, 129}));
  EXPECT_TRUE((decode_rgbe({128, 128, 128, 129}) == Rgb::Ones()).all());
}

TEST(Rgbe, EncodeMatchesExponentScan) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mant(0.0, 1.0), ex(-20.0, 30.0);
  for (int i = 0; i < 20000; ++i) {
    const double scale = std::pow(10.0, ex(rng));
    const double r = mant(rng) * scale, g = mant(rng) * scale, b = mant(rng) * scale;
    const auto want = oracle::rgbe_scan(r, g, b);
    const auto got = encode_rgbe(r, g, b);
    ASSERT_EQ(got, (RgbeBytes{want[0], want[1], want[2], want[3]})) << r << " " << g << " " << b;
  }
}

TEST(Rgbe, FileRoundTripWithinOnePercent) {
  TempDir dir("rgbe");
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ex(-6.0, 30.0), u(0.1, 1.0);
  LinearImage img(64, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 64; ++x) {
      const double s = std::pow(10.0, ex(rng));
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = s * u(rng);
    }
  write_rgbe(img, dir / "a.hdr");
  const auto back = read_rgbe(dir / "a.hdr");
  ASSERT_TRUE(back.same_shape(64, 32));
  double worst = 0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 64; ++x) {
      const double m = pixel(img, x, y).maxCoeff();
      for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(back.at(x, y, c) - img.at(x, y, c)) / m);
    }
  EXPECT_LE(worst, 0.01);
}

TEST(Rgbe, HeaderAndRunLengthLayout) {
  TempDir dir("rgbehdr");
  LinearImage img(40, 3, 0.25);
  write_rgbe(img, dir / "c.hdr");
  std::ifstream in(dir / "c.hdr", std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(text.rfind("#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y 3 +X 40\n", 0), 0u);
  // constant rows compress to one run per channel: 4 header bytes + 4 x 2 bytes per row
  const std::size_t header = std::string("#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y 3 +X 40\n").size();
  EXPECT_EQ(text.size(), header + 3 * (4 + 8));
  EXPECT_TRUE(read_rgbe(dir / "c.hdr") == quantize_rgbe(img)) << "decoded values";
}

TEST(Rgbe, ReadsFlatAndOldStyleRuns) {
  TempDir dir("rgbeflat");
  {
    std::ofstream out(dir / "f.hdr", std::ios::binary);
    out << "#?RGBE\nEXPOSURE=1\n\n-Y 1 +X 4\n";
    const std::uint8_t px[] = {128, 64, 32, 129, 1, 1, 1, 2, 0, 0, 0, 0};
    out.write(reinterpret_cast<const char*>(px), sizeof px);
  }
  const auto img = read_rgbe(dir / "f.hdr");
  ASSERT_TRUE(img.same_shape(4, 1));
  EXPECT_DOUBLE_EQ(img.at(0, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(img.at(0, 0, 1), 0.5);
  EXPECT_DOUBLE_EQ(img.at(2, 0, 2), 0.25);
  EXPECT_DOUBLE_EQ(img.at(3, 0, 0), 0.0);
}

TEST(Rgbe, MalformedInputs) {
  TempDir dir("rgbebad");
  auto write = [&](const std::string& name, const std::string& s) {
    std::ofstream out(dir / name, std::ios::binary);
    out << s;
  };
  write("nomagic.hdr", "P6\n\n-Y 1 +X 1\n");
  write("orient.hdr", "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n+Y 1 +X 1\n\x80\x80\x80\x81");
  write("short.hdr", "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y 2 +X 2\n\x80\x80");
  EXPECT_THROW(read_rgbe(dir / "nomagic.hdr"), Error);
  EXPECT_THROW(read_rgbe(dir / "orient.hdr"), Error);
  EXPECT_THROW(read_rgbe(dir / "short.hdr"), Error);
}

TEST(Masking, ZeroesBackgroundAndIsIdempotent) {
  std::mt19937_64 rng(2);
  const auto img = testutil::random_tonemapped(9, 7, rng);
  const auto lin = testutil::random_linear(9, 7, rng);
  const Mask m = testutil::random_mask(9, 7, rng);
  const auto a = apply_mask_zero(img, m);
  const auto l = apply_mask_zero(lin, m);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 9; ++x)
      for (int c = 0; c < 3; ++c) {
        EXPECT_EQ(a.at(x, y, c), m(x, y) ? img.at(x, y, c) : 0);
        EXPECT_EQ(l.at(x, y, c), m(x, y) ? lin.at(x, y, c) : 0.0);
      }
  EXPECT_TRUE(apply_mask_zero(a, m) == a);
  EXPECT_THROW(apply_mask_zero(img, Mask(3, 3)), ValidationError);
}

TEST(Dataset, WriteLoadIdentity) {
  TempDir dir("ds");
  std::mt19937_64 rng(13);
  DatasetContent c;
  c.input_exposure = -1.375;
  c.bounding_box = {-0.5, -0.25, 0.0, 1.25, 0.5, 1.0};
  for (int i = 0; i < 3; ++i)
    c.inputs.push_back({testutil::random_tonemapped(12, 10, rng), testutil::random_mask(12, 10, rng), test_camera(i)});
  for (int i = 0; i < 2; ++i) {
    TestViewData t;
    t.image = testutil::random_tonemapped(12, 10, rng);
    t.mask = testutil::random_mask(12, 10, rng);
    t.camera = test_camera(0.37 * i);
    t.exposure = 0.1 * i - 2.0 / 3.0;
    t.env = LinearImage(8, 4, 0.5);
    t.env_id = "e" + std::to_string(i);
    t.category = i == 0 ? "outdoor" : "indoor-natural";
    t.same_environment = i == 0;
    c.tests.push_back(t);
  }
  write_object_dataset(dir.path(), c);
  const ObjectDataset d = load_object_dataset(dir.path());
  EXPECT_EQ(d.input_exposure, c.input_exposure);
  EXPECT_EQ(d.bounding_box, c.bounding_box);
  ASSERT_EQ(d.inputs.size(), 3u);
  ASSERT_EQ(d.tests.size(), 2u);
  auto same_camera = [](const Camera& a, const Camera& b) {
    return (a.K() - b.K()).cwiseAbs().maxCoeff() < 1e-12 && (a.R() - b.R()).cwiseAbs().maxCoeff() < 1e-12 &&
           (a.t() - b.t()).cwiseAbs().maxCoeff() < 1e-12 && std::abs(a.k1() - b.k1()) < 1e-12;
  };
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(d.inputs[i].index, i);
    EXPECT_TRUE(same_camera(d.inputs[i].camera, c.inputs[i].camera));
    EXPECT_TRUE(read_png_rgb(d.inputs[i].image) == c.inputs[i].image);
    EXPECT_TRUE(read_mask_png(d.inputs[i].mask) == c.inputs[i].mask);
  }
  for (int i = 0; i < 2; ++i) {
    EXPECT_TRUE(same_camera(d.tests[i].camera, c.tests[i].camera));
    EXPECT_EQ(d.tests[i].exposure, c.tests[i].exposure);
    EXPECT_TRUE(read_png_rgb(d.tests[i].image) == c.tests[i].image);
    EXPECT_EQ(d.tests[i].env_id, c.tests[i].env_id);
    EXPECT_EQ(d.tests[i].category, c.tests[i].category);
    EXPECT_EQ(d.tests[i].same_environment, c.tests[i].same_environment);
    EXPECT_TRUE(read_rgbe(d.tests[i].env) == c.tests[i].env);
  }
}

TEST(Dataset, EmptyDirectoryNamesFirstMissingFile) {
  TempDir dir("dsempty");
  try {
    load_object_dataset(dir.path());
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find((dir.path() / "test" / "inputs" / "exposure.txt").string()),
              std::string::npos)
        << e.what();
  }
}

TEST(Dataset, MissingCameraNamed) {
  TempDir dir("dsmiss");
  std::mt19937_64 rng(1);
  DatasetContent c;
  c.inputs.push_back({testutil::random_tonemapped(8, 8, rng), testutil::random_mask(8, 8, rng), test_camera(0)});
  for (int i = 0; i < 2; ++i) {
    TestViewData t;
    t.image = testutil::random_tonemapped(8, 8, rng);
    t.mask = testutil::random_mask(8, 8, rng);
    t.camera = test_camera(i);
    t.env = LinearImage(4, 2, 1.0);
    c.tests.push_back(t);
  }
  write_object_dataset(dir.path(), c);
  const fs::path gone = dir.path() / "test" / "gt_camera_0001.txt";
  fs::remove(gone);
  try {
    load_object_dataset(dir.path());
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(gone.string()), std::string::npos) << e.what();
  }
}
