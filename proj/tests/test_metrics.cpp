#include "oracles.hpp"
#include "test_util.hpp"

#include <relit/metrics.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace relit;

namespace {

Mask full_mask(int w, int h) {
  Mask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.set(x, y, true);
  return m;
}

TonemappedImage constant_image(int w, int h, std::uint8_t v) {
  TonemappedImage img(w, h);
  for (auto& p : img.data()) p = v;
  return img;
}

TonemappedImage add_noise(const TonemappedImage& img, int amplitude, std::mt19937_64& rng) {
  TonemappedImage out = img;
  std::uniform_int_distribution<int> d(-amplitude, amplitude);
  for (auto& p : out.data()) p = static_cast<std::uint8_t>(std::clamp(p + d(rng), 0, 255));
  return out;
}

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

}  // namespace

TEST(Psnr, MatchesOracleOnRandomPairs) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto a = testutil::random_tonemapped(32, 32, rng);
    const auto b = testutil::random_tonemapped(32, 32, rng);
    const auto m = testutil::random_mask(32, 32, rng);
    EXPECT_NEAR(masked_psnr(a, b, m), oracle::psnr(a, b, m), 1e-9);
  }
}

TEST(Psnr, IdenticalIsInfinite) {
  std::mt19937_64 rng(2);
  const auto a = testutil::random_tonemapped(8, 8, rng);
  EXPECT_TRUE(std::isinf(masked_psnr(a, a, full_mask(8, 8))));
}

TEST(Psnr, OneLevelDifference) {
  const auto a = constant_image(10, 10, 100), b = constant_image(10, 10, 101);
  EXPECT_NEAR(masked_psnr(a, b, full_mask(10, 10)), 20.0 * std::log10(255.0), 1e-12);
  EXPECT_NEAR(20.0 * std::log10(255.0), 48.13, 0.005);
}

TEST(Psnr, SymmetricAndIgnoresBackground) {
  std::mt19937_64 rng(3);
  auto a = testutil::random_tonemapped(16, 16, rng);
  const auto b = testutil::random_tonemapped(16, 16, rng);
  const auto m = testutil::random_mask(16, 16, rng);
  const double base = masked_psnr(a, b, m);
  EXPECT_DOUBLE_EQ(masked_psnr(b, a, m), base);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      if (!m(x, y)) a.at(x, y, 1) = 255 - a.at(x, y, 1);
  EXPECT_DOUBLE_EQ(masked_psnr(a, b, m), base);
}

TEST(Psnr, DecreasesWithNoise) {
  std::mt19937_64 rng(4);
  const auto a = constant_image(32, 32, 128);
  double prev = std::numeric_limits<double>::infinity();
  for (int amp : {1, 2, 4, 8, 16, 32}) {
    std::mt19937_64 local(99);
    const double v = masked_psnr(a, add_noise(a, amp, local), full_mask(32, 32));
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Psnr, Errors) {
  std::mt19937_64 rng(5);
  const auto a = testutil::random_tonemapped(8, 8, rng);
  EXPECT_THROW(masked_psnr(a, a, Mask(8, 8)), ValidationError);
  EXPECT_THROW(masked_psnr(a, testutil::random_tonemapped(8, 9, rng), full_mask(8, 8)), ValidationError);
}

TEST(Ssim, MatchesOracleOnRandomPairs) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 100; ++i) {
    const auto a = testutil::random_tonemapped(32, 32, rng);
    const auto b = add_noise(a, 60, rng);
    const auto m = testutil::random_mask(32, 32, rng);
    EXPECT_NEAR(masked_ssim(a, b, m), oracle::ssim(a, b, m), 1e-9);
  }
  for (int i = 0; i < 20; ++i) {
    const auto a = testutil::random_tonemapped(16, 16, rng);
    const auto b = testutil::random_tonemapped(16, 16, rng);
    EXPECT_NEAR(masked_ssim(a, b, full_mask(16, 16)), oracle::ssim(a, b, full_mask(16, 16)), 1e-9);
  }
}

TEST(Ssim, SelfIsOne) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 10; ++i) {
    const auto a = testutil::random_tonemapped(20, 12, rng);
    EXPECT_EQ(masked_ssim(a, a, testutil::random_mask(20, 12, rng)), 1.0);
  }
}

TEST(Ssim, ConstantImagesClosedForm) {
  const auto a = constant_image(12, 12, 128), b = constant_image(12, 12, 64);
  const double x = 128 / 255.0, y = 64 / 255.0, c1 = 1e-4;
  EXPECT_NEAR(masked_ssim(a, b, full_mask(12, 12)), (2 * x * y + c1) / (x * x + y * y + c1), 1e-12);
}

TEST(Ssim, SymmetricAndIgnoresBackground) {
  std::mt19937_64 rng(8);
  const auto a = testutil::random_tonemapped(16, 16, rng);
  auto b = add_noise(a, 30, rng);
  const auto m = testutil::random_mask(16, 16, rng);
  const double base = masked_ssim(a, b, m);
  EXPECT_NEAR(masked_ssim(b, a, m), base, 1e-12);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      if (!m(x, y)) b.at(x, y, 0) = 7;
  EXPECT_NEAR(masked_ssim(a, b, m), base, 1e-12);
}

TEST(Ssim, RejectsSmallImages) {
  const auto a = constant_image(6, 10, 3);
  EXPECT_THROW(masked_ssim(a, a, full_mask(6, 10)), ValidationError);
}

TEST(Perceptual, MaskedMeans) {
  const ScalarImage c(10, 10, 0.2);
  std::mt19937_64 rng(9);
  EXPECT_NEAR(masked_perceptual(c, testutil::random_mask(10, 10, rng)), 0.2, 1e-12);

  const Mask m = testutil::random_mask(10, 10, rng);
  ScalarImage indicator(10, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) indicator.at(x, y, 0) = m(x, y) ? 1.0 : 0.0;
  EXPECT_DOUBLE_EQ(masked_perceptual(indicator, m), 1.0);

  ScalarImage ramp(8, 4);
  Mask left(8, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 8; ++x) {
      ramp.at(x, y, 0) = x;
      left.set(x, y, x < 4);
    }
  EXPECT_DOUBLE_EQ(masked_perceptual(ramp, left), 1.5);
  EXPECT_THROW(masked_perceptual(ramp, Mask(8, 4)), ValidationError);
}

TEST(Perceptual, NetworkInputRange) {
  TonemappedImage img(2, 1);
  img.at(0, 0, 0) = 255;
  img.at(0, 0, 1) = 0;
  img.at(1, 0, 2) = 200;
  Mask m(2, 1);
  m.set(0, 0, true);
  const auto in = perceptual_network_input(img, m);
  EXPECT_DOUBLE_EQ(in.at(0, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(in.at(0, 0, 1), -1.0);
  EXPECT_DOUBLE_EQ(in.at(1, 0, 2), 0.0);
}

TEST(Spearman, PerfectMonotone) {
  for (int n : {3, 5, 7}) {
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = i;
      y[i] = std::exp(i);
    }
    const auto s = spearman(x, y);
    EXPECT_TRUE(s.defined);
    EXPECT_DOUBLE_EQ(s.r, 1.0);
    EXPECT_NEAR(s.p, 2.0 / factorial(n), 1e-15);
  }
  EXPECT_DOUBLE_EQ(spearman({1, 2, 3}, {3, 2, 1}).r, -1.0);
}

TEST(Spearman, MatchesPermutationOracleN9) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> x(9), y(9);
    for (int i = 0; i < 9; ++i) {
      x[i] = u(rng);
      y[i] = 0.5 * x[i] + u(rng);
    }
    const auto s = spearman(x, y);
    const auto o = oracle::spearman_permutation(x, y);
    EXPECT_NEAR(s.r, o.r, 1e-12);
    EXPECT_NEAR(s.p, o.p, 1e-12);
    EXPECT_TRUE(s.exact);
  }
}

TEST(Spearman, TiesUseAverageRanks) {
  const std::vector<double> x = {1, 2, 2, 3, 5, 5, 5}, y = {2, 1, 4, 3, 7, 6, 6};
  const auto s = spearman(x, y);
  const auto o = oracle::spearman_permutation(x, y);
  EXPECT_NEAR(s.r, o.r, 1e-12);
  EXPECT_NEAR(s.p, o.p, 1e-12);
}

TEST(Spearman, MonotoneTransformInvariance) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.1, 2);
  std::vector<double> x(8), y(8), tx(8), ty(8);
  for (int i = 0; i < 8; ++i) {
    x[i] = u(rng);
    y[i] = u(rng);
    tx[i] = std::log(x[i]);
    ty[i] = -1.0 / y[i];
  }
  const auto a = spearman(x, y), b = spearman(tx, ty);
  EXPECT_NEAR(a.r, b.r, 1e-12);
  EXPECT_NEAR(a.p, b.p, 1e-12);
}

TEST(Spearman, LargeNUsesTApproximation) {
  std::vector<double> x(30), y(30);
  for (int i = 0; i < 30; ++i) {
    x[i] = i;
    y[i] = (i * 7) % 30;
  }
  const auto s = spearman(x, y);
  EXPECT_FALSE(s.exact);
  EXPECT_NEAR(s.r, oracle::pearson(oracle::ranks(x), oracle::ranks(y)), 1e-12);
  EXPECT_GT(s.p, 0.0);
  EXPECT_LE(s.p, 1.0);
  std::vector<double> z(30);
  for (int i = 0; i < 30; ++i) z[i] = i * i;
  EXPECT_LT(spearman(x, z).p, 1e-6);
}

TEST(Spearman, ConstantAndTooShort) {
  EXPECT_FALSE(spearman({1, 1, 1, 1}, {1, 2, 3, 4}).defined);
  EXPECT_THROW(spearman({1, 2}, {2, 1}), ValidationError);
  EXPECT_THROW(spearman({1, 2, 3}, {2, 1}), ValidationError);
}
