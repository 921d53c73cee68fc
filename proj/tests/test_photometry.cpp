#include "test_util.hpp"

#include <relit/photometry.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace relit;

namespace {

std::uint8_t reference_tone(double x, double ev) {
  const double y = 255.0 * std::pow(x * std::pow(2.0, ev), 1.0 / 2.2);
  if (y >= 255.0) return 255;
  return static_cast<std::uint8_t>(std::floor(y + 0.5));
}

Mask full_mask(int w, int h) {
  Mask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.set(x, y, true);
  return m;
}

}  // namespace

TEST(ToneMap, Endpoints) {
  EXPECT_EQ(tone_map_value(0.0, 0.0), 0);
  EXPECT_EQ(tone_map_value(1.0, 0.0), 255);
  EXPECT_EQ(tone_map_value(0.5, 0.0), 186);
  EXPECT_EQ(tone_map_value(7.0, 0.0), 255);
  EXPECT_EQ(tone_map_value(-1.0, 0.0), 0);
}

TEST(ToneMap, ExposureShiftIdentity) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng);
    EXPECT_EQ(tone_map_value(2 * x, -1.0), tone_map_value(x, 0.0));
  }
}

TEST(ToneMap, MatchesFormulaAtRandomPoints) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> x(0.0, 2.0), ev(-4.0, 4.0);
  int mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    const double a = x(rng), e = ev(rng);
    if (tone_map_value(a, e) != reference_tone(a, e)) ++mismatches;
  }
  EXPECT_EQ(mismatches, 0);
}

TEST(ToneMap, Monotone) {
  for (double ev : {-2.0, 0.0, 1.5}) {
    int prev = 0;
    for (int i = 0; i <= 4000; ++i) {
      const int v = tone_map_value(i / 2000.0, ev);
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
  for (double x : {0.01, 0.2, 0.7}) {
    int prev = 0;
    for (int i = -40; i <= 40; ++i) {
      const int v = tone_map_value(x, i / 10.0);
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
}

TEST(ToneMap, ImagePerChannelEv) {
  LinearImage img(1, 1);
  set_pixel(img, 0, 0, Rgb(0.5, 0.25, 0.125));
  const TonemappedImage t = tone_map(img, Rgb(0.0, 1.0, 2.0));
  EXPECT_EQ(t.at(0, 0, 0), 186);
  EXPECT_EQ(t.at(0, 0, 1), 186);
  EXPECT_EQ(t.at(0, 0, 2), 186);
}

TEST(ToneMap, InverseIsPreimage) {
  TonemappedImage img(16, 16);
  for (int i = 0; i < 256; ++i) img.data()[3 * i] = img.data()[3 * i + 1] = img.data()[3 * i + 2] = i;
  for (double ev : {-3.0, 0.0, 2.5}) {
    const TonemappedImage back = tone_map(inverse_tone_map(img, ev), ev);
    for (std::size_t i = 0; i < img.data().size(); ++i) EXPECT_EQ(back.data()[i], img.data()[i]);
  }
}

TEST(SolveExposure, ExactPreimage) {
  std::mt19937_64 rng(4);
  const TonemappedImage gt = testutil::random_tonemapped(24, 24, rng);
  const ExposureSolution s = solve_exposure(inverse_tone_map(gt, 0.0), gt, full_mask(24, 24));
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(s.ev[c], 0.0, 1e-3);
}

TEST(SolveExposure, RecoversScalesPerChannel) {
  std::mt19937_64 rng(5);
  const LinearImage img = testutil::random_linear(32, 32, rng, 0.001, 1.0);
  const TonemappedImage gt = tone_map(img, 0.0);
  const Mask mask = testutil::random_mask(32, 32, rng);
  for (int k = -18; k <= 18; ++k) {
    const Rgb s(std::exp2(k / 3.0), std::exp2(-k / 3.0), std::exp2(0.5 + k / 6.0));
    LinearImage scaled = img;
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) set_pixel(scaled, x, y, pixel(img, x, y) * s);
    const ExposureSolution sol = solve_exposure(scaled, gt, mask);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(sol.ev[c], -std::log2(s[c]), 0.01) << "k " << k << " c " << c;
  }
}

TEST(SolveExposure, ChannelScales) {
  std::mt19937_64 rng(6);
  const LinearImage img = testutil::random_linear(16, 16, rng, 0.01, 1.0);
  const TonemappedImage gt = tone_map(img, 0.0);
  LinearImage scaled = img;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) set_pixel(scaled, x, y, pixel(img, x, y) * Rgb(2, 4, 8));
  const ExposureSolution sol = solve_exposure(scaled, gt, full_mask(16, 16));
  EXPECT_NEAR(sol.ev[0], -1.0, 0.01);
  EXPECT_NEAR(sol.ev[1], -2.0, 0.01);
  EXPECT_NEAR(sol.ev[2], -3.0, 0.01);
}

TEST(SolveExposure, DegenerateChannelAndErrors) {
  std::mt19937_64 rng(7);
  LinearImage img = testutil::random_linear(8, 8, rng, 0.1, 1.0);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) img.at(x, y, 2) = 0.0;
  const TonemappedImage gt = testutil::random_tonemapped(8, 8, rng);
  const ExposureSolution sol = solve_exposure(img, gt, full_mask(8, 8));
  EXPECT_TRUE(sol.degenerate[2]);
  EXPECT_FALSE(sol.degenerate[0]);
  EXPECT_EQ(sol.ev[2], 0.0);
  EXPECT_THROW(solve_exposure(img, gt, Mask(8, 8)), ValidationError);
  EXPECT_THROW(solve_exposure(img, testutil::random_tonemapped(9, 8, rng), full_mask(8, 8)), ValidationError);
}

TEST(MergeBrackets, SingleFrameIdentity) {
  std::mt19937_64 rng(8);
  const LinearImage img = testutil::random_linear(10, 6, rng, 0.0, 0.9);
  const MergeResult r = merge_brackets({{img, 1.0}});
  EXPECT_EQ(r.radiance.data().size(), img.data().size());
  for (std::size_t i = 0; i < img.data().size(); ++i) EXPECT_DOUBLE_EQ(r.radiance.data()[i], img.data()[i]);
  EXPECT_EQ(r.saturated.count(), 0u);
}

TEST(MergeBrackets, TwoFramesHandValue) {
  const MergeResult r =
      merge_brackets({{LinearImage(1, 1, 0.3), 1.0}, {LinearImage(1, 1, 0.15), 0.5}});
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(r.radiance.at(0, 0, c), 0.3, 1e-15);
}

TEST(MergeBrackets, NoiselessBracketsExact) {
  std::mt19937_64 rng(9);
  const LinearImage radiance = testutil::random_linear(20, 20, rng, 0.05, 3.0);
  std::vector<BracketFrame> frames;
  for (double t : {1.0 / 64, 1.0 / 16, 1.0 / 4, 1.0}) {
    LinearImage f(20, 20);
    for (std::size_t i = 0; i < f.data().size(); ++i) f.data()[i] = std::min(1.0, radiance.data()[i] * t);
    frames.push_back({f, t});
  }
  const MergeResult r = merge_brackets(frames);
  double worst = 0;
  for (std::size_t i = 0; i < radiance.data().size(); ++i)
    worst = std::max(worst, std::abs(r.radiance.data()[i] - radiance.data()[i]) / radiance.data()[i]);
  EXPECT_LT(worst, 1e-12);
  EXPECT_EQ(r.saturated.count(), 0u);
}

TEST(MergeBrackets, SaturatedLongExposureExcluded) {
  LinearImage long_frame(1, 1, 1.0), short_frame(1, 1, 0.4);
  long_frame.at(0, 0, 1) = 0.99;
  const MergeResult r = merge_brackets({{long_frame, 2.0}, {short_frame, 0.25}});
  for (int c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(r.radiance.at(0, 0, c), 0.4 / 0.25);
  EXPECT_FALSE(r.saturated(0, 0));
}

TEST(MergeBrackets, AllSaturatedFlagged) {
  const MergeResult r = merge_brackets({{LinearImage(2, 1, 1.0), 1.0}, {LinearImage(2, 1, 0.99), 0.1}});
  EXPECT_TRUE(r.saturated(0, 0));
  EXPECT_TRUE(r.saturated(1, 0));
  EXPECT_DOUBLE_EQ(r.radiance.at(0, 0, 0), 0.99 / 0.1);
}

TEST(MergeBrackets, Errors) {
  EXPECT_THROW(merge_brackets({}), ValidationError);
  EXPECT_THROW(merge_brackets({{LinearImage(1, 1, 0.5), 1.0}, {LinearImage(1, 1, 0.5), 1.0}}), ValidationError);
  EXPECT_THROW(merge_brackets({{LinearImage(1, 1, 0.5), 1.0}, {LinearImage(2, 1, 0.5), 2.0}}), ValidationError);
  EXPECT_THROW(merge_brackets({{LinearImage(1, 1, 0.5), 0.0}}), ValidationError);
  EXPECT_THROW(merge_brackets({{LinearImage(1, 1, 0.5), 1.0}}, 0.0), ValidationError);
}

TEST(ColorTransform, IdentityOnEqualPatches) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<Rgb> src(24);
  for (auto& p : src) p = Rgb(u(rng), u(rng), u(rng));
  const ColorTransform t = fit_color_transform(src, src);
  EXPECT_LT((t.matrix - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(ColorTransform, RecoversRandomMatrix) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.05, 1.0), e(-0.3, 0.3);
  for (int trial = 0; trial < 20; ++trial) {
    Mat3 a = Mat3::Identity();
    for (int i = 0; i < 9; ++i) a(i / 3, i % 3) += e(rng);
    std::vector<Rgb> src(24), dst(24);
    for (int i = 0; i < 24; ++i) {
      src[i] = Rgb(u(rng), u(rng), u(rng));
      dst[i] = (a * src[i].matrix()).array();
    }
    const ColorTransform t = fit_color_transform(src, dst);
    EXPECT_LT((t.matrix - a).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT(t.residual_rms, 1e-10);
  }
}

TEST(ColorTransform, RankErrors) {
  EXPECT_THROW(fit_color_transform({Rgb(1, 0, 0), Rgb(0, 1, 0)}, {Rgb(1, 0, 0), Rgb(0, 1, 0)}), ValidationError);
  const std::vector<Rgb> flat = {Rgb(1, 1, 0), Rgb(2, 2, 0), Rgb(0.5, 0.5, 0), Rgb(3, 3, 0)};
  EXPECT_THROW(fit_color_transform(flat, flat), ValidationError);
}
