#pragma once

// Masked image-quality metrics and rank correlation.
//
// All image metrics take 8-bit images, scale them to [0, 1], zero the background
// with the ground-truth mask, and average only over foreground pixels.

#include <relit/error.hpp>
#include <relit/image.hpp>

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

namespace relit {

namespace detail {

inline std::vector<double> masked_unit_channel(const TonemappedImage& img, const Mask& mask, int c) {
  std::vector<double> out(img.pixel_count());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      out[static_cast<std::size_t>(y) * img.width() + x] = mask(x, y) ? img.at(x, y, c) / 255.0 : 0.0;
  return out;
}

inline void check_metric_inputs(const TonemappedImage& a, const TonemappedImage& b, const Mask& mask) {
  require(a.same_shape(b.width(), b.height()), "metric: image dimensions differ");
  require(mask.same_shape(a.width(), a.height()), "metric: mask dimensions do not match");
  require(mask.count() > 0, "metric: mask is empty");
}

}  // namespace detail

/// PSNR over masked pixels x channels: 10 log10(1 / MSE). Identical inputs give +infinity.
inline double masked_psnr(const TonemappedImage& a, const TonemappedImage& b, const Mask& mask) {
  detail::check_metric_inputs(a, b, mask);
  double sum = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (!mask(x, y)) continue;
      for (int c = 0; c < 3; ++c) {
        const double d = (a.at(x, y, c) - b.at(x, y, c)) / 255.0;
        sum += d * d;
      }
    }
  }
  const double mse = sum / (3.0 * static_cast<double>(mask.count()));
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

inline constexpr int kSsimWindow = 7;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Per-pixel SSIM map of one channel; uniform 7x7 window cropped at the borders,
/// sample (N - 1) normalized variances, data range 1.
inline std::vector<double> ssim_map(const std::vector<double>& a, const std::vector<double>& b, int w, int h) {
  constexpr int r = kSsimWindow / 2;
  // horizontal window sums of a, b, a^2, b^2, ab
  std::vector<std::array<double, 5>> row(a.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::array<double, 5> s{};
      for (int k = std::max(0, x - r); k <= std::min(w - 1, x + r); ++k) {
        const std::size_t i = static_cast<std::size_t>(y) * w + k;
        s[0] += a[i];
        s[1] += b[i];
        s[2] += a[i] * a[i];
        s[3] += b[i] * b[i];
        s[4] += a[i] * b[i];
      }
      row[static_cast<std::size_t>(y) * w + x] = s;
    }
  }
  std::vector<double> out(a.size());
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
      std::array<double, 5> s{};
      for (int k = y0; k <= y1; ++k) {
        const auto& v = row[static_cast<std::size_t>(k) * w + x];
        for (int q = 0; q < 5; ++q) s[q] += v[q];
      }
      const double n = static_cast<double>((x1 - x0 + 1) * (y1 - y0 + 1));
      const double mu_a = s[0] / n, mu_b = s[1] / n;
      const double norm = n / (n - 1.0);
      const double var_a = norm * (s[2] / n - mu_a * mu_a);
      const double var_b = norm * (s[3] / n - mu_b * mu_b);
      const double cov = norm * (s[4] / n - mu_a * mu_b);
      out[static_cast<std::size_t>(y) * w + x] =
          ((2 * mu_a * mu_b + kSsimC1) * (2 * cov + kSsimC2)) /
          ((mu_a * mu_a + mu_b * mu_b + kSsimC1) * (var_a + var_b + kSsimC2));
    }
  }
  return out;
}

/// Mean SSIM over masked pixels x channels.
inline double masked_ssim(const TonemappedImage& a, const TonemappedImage& b, const Mask& mask) {
  detail::check_metric_inputs(a, b, mask);
  require(a.width() >= kSsimWindow && a.height() >= kSsimWindow, "masked_ssim: image smaller than the 7x7 window");
  if (a == b) return 1.0;
  double sum = 0;
  for (int c = 0; c < 3; ++c) {
    const auto map = ssim_map(detail::masked_unit_channel(a, mask, c), detail::masked_unit_channel(b, mask, c),
                              a.width(), a.height());
    for (int y = 0; y < a.height(); ++y)
      for (int x = 0; x < a.width(); ++x)
        if (mask(x, y)) sum += map[static_cast<std::size_t>(y) * a.width() + x];
  }
  return sum / (3.0 * static_cast<double>(mask.count()));
}

/// Input expected by the external perceptual network: values in [-1, 1], background 0.
inline Image<double, 3> perceptual_network_input(const TonemappedImage& img, const Mask& mask) {
  require(mask.same_shape(img.width(), img.height()), "perceptual input: mask dimensions do not match");
  Image<double, 3> out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = mask(x, y) ? img.at(x, y, c) / 127.5 - 1.0 : 0.0;
  return out;
}

/// Mean of an externally computed per-pixel distance map over the masked pixels.
inline double masked_perceptual(const ScalarImage& distance, const Mask& mask) {
  require(mask.same_shape(distance.width(), distance.height()), "masked_perceptual: mask dimensions do not match");
  require(mask.count() > 0, "masked_perceptual: mask is empty");
  double sum = 0;
  for (int y = 0; y < distance.height(); ++y)
    for (int x = 0; x < distance.width(); ++x)
      if (mask(x, y)) sum += distance.at(x, y, 0);
  return sum / static_cast<double>(mask.count());
}

struct SpearmanResult {
  double r = std::numeric_limits<double>::quiet_NaN();
  double p = std::numeric_limits<double>::quiet_NaN();
  bool defined = false;  ///< false when either input is constant
  bool exact = false;    ///< p from full permutation enumeration
};

/// Average ranks (1-based), ties share the mean of their positions.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return v[i] < v[j]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

/// Spearman rank correlation. Two-sided p: exact permutation test for N <= 10,
/// Student-t approximation above.
inline SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), "spearman: inputs differ in length");
  require(x.size() >= 3, "spearman: need at least 3 observations");
  const std::size_t n = x.size();
  auto centered = [](std::vector<double> r) {
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
    for (double& v : r) v -= mean;
    return r;
  };
  const auto rx = centered(average_ranks(x));
  const auto ry = centered(average_ranks(y));
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += rx[i] * rx[i];
    syy += ry[i] * ry[i];
    sxy += rx[i] * ry[i];
  }
  SpearmanResult res;
  if (sxx == 0 || syy == 0) return res;
  res.defined = true;
  const double denom = std::sqrt(sxx * syy);
  res.r = std::clamp(sxy / denom, -1.0, 1.0);

  if (n <= 10) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    const double threshold = std::abs(sxy) - 1e-9 * denom;
    std::size_t hits = 0, total = 0;
    do {
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) s += rx[i] * ry[perm[i]];
      if (std::abs(s) >= threshold) ++hits;
      ++total;
    } while (std::next_permutation(perm.begin(), perm.end()));
    res.p = static_cast<double>(hits) / static_cast<double>(total);
    res.exact = true;
  } else {
    const double dof = static_cast<double>(n) - 2.0;
    if (std::abs(res.r) >= 1.0) {
      res.p = 0.0;
    } else {
      const double t = res.r * std::sqrt(dof / (1.0 - res.r * res.r));
      boost::math::students_t dist(dof);
      res.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    }
  }
  return res;
}

}  // namespace relit
