#pragma once

#include <relit/error.hpp>
#include <relit/image.hpp>
#include <relit/math.hpp>

#include <array>
#include <set>
#include <vector>

namespace relit {

inline constexpr double kDefaultGamma = 1.0 / 2.2;

/// y = clamp(round(255 (2^ev x)^gamma), 0, 255), rounding half away from zero.
inline std::uint8_t tone_map_value(double x, double ev, double gamma = kDefaultGamma) {
  const double y = 255.0 * std::pow(std::exp2(ev) * std::max(x, 0.0), gamma);
  return static_cast<std::uint8_t>(std::clamp(std::round(y), 0.0, 255.0));
}

inline TonemappedImage tone_map(const LinearImage& img, const Rgb& ev, double gamma = kDefaultGamma) {
  require(gamma > 0, "tone_map: gamma must be positive");
  TonemappedImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = tone_map_value(img.at(x, y, c), ev[c], gamma);
  return out;
}

inline TonemappedImage tone_map(const LinearImage& img, double ev, double gamma = kDefaultGamma) {
  return tone_map(img, Rgb::Constant(ev), gamma);
}

/// Linear preimage of 8-bit values: x = (y / 255)^(1 / gamma) / 2^ev.
inline LinearImage inverse_tone_map(const TonemappedImage& img, double ev, double gamma = kDefaultGamma) {
  require(gamma > 0, "inverse_tone_map: gamma must be positive");
  std::array<double, 256> lut{};
  for (int v = 0; v < 256; ++v) lut[v] = std::pow(v / 255.0, 1.0 / gamma) / std::exp2(ev);
  LinearImage out(img.width(), img.height());
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = lut[src[i]];
  return out;
}

struct ExposureSolution {
  Rgb ev = Rgb::Zero();
  /// Channels whose masked render values are all zero; their EV is reported as 0.
  std::array<bool, 3> degenerate{};
};

namespace detail {

struct ExposureObjective {
  std::vector<double> xg;  // x^gamma
  std::vector<double> target;
  double gamma;

  double operator()(double ev) const {
    const double scale = std::exp2(ev * gamma);
    double acc = 0;
    for (std::size_t i = 0; i < xg.size(); ++i) {
      const double r = 255.0 * std::min(scale * xg[i], 1.0) - target[i];
      acc += r * r;
    }
    return acc / static_cast<double>(xg.size());
  }
};

}  // namespace detail

/// Per-channel EV minimizing the masked MSE between the (unrounded, clipped) tone-mapped
/// render and the 8-bit ground truth. 0.5-stop grid over [-16, 16], then golden section.
inline ExposureSolution solve_exposure(const LinearImage& render, const TonemappedImage& gt, const Mask& mask,
                                       double gamma = kDefaultGamma) {
  require(render.same_shape(gt.width(), gt.height()), "solve_exposure: render and ground truth differ in size");
  require(mask.same_shape(gt.width(), gt.height()), "solve_exposure: mask dimensions do not match");
  require(gamma > 0, "solve_exposure: gamma must be positive");
  require(mask.count() > 0, "solve_exposure: mask is empty");

  ExposureSolution sol;
  for (int c = 0; c < 3; ++c) {
    detail::ExposureObjective f{{}, {}, gamma};
    bool any_signal = false;
    for (int y = 0; y < gt.height(); ++y) {
      for (int x = 0; x < gt.width(); ++x) {
        if (!mask(x, y)) continue;
        const double v = render.at(x, y, c);
        require(v >= 0 && std::isfinite(v), "solve_exposure: render must be finite and non-negative");
        any_signal = any_signal || v > 0;
        f.xg.push_back(std::pow(v, gamma));
        f.target.push_back(gt.at(x, y, c));
      }
    }
    if (!any_signal) {
      sol.degenerate[c] = true;
      continue;
    }
    constexpr double kLo = -16.0, kHi = 16.0, kStep = 0.5;
    double best_ev = kLo, best = f(kLo);
    for (double ev = kLo + kStep; ev <= kHi + 1e-12; ev += kStep) {
      const double v = f(ev);
      if (v < best) {
        best = v;
        best_ev = ev;
      }
    }
    double a = std::max(kLo, best_ev - kStep), b = std::min(kHi, best_ev + kStep);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > 1e-4) {
      if (f1 <= f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - inv_phi * (b - a);
        f1 = f(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + inv_phi * (b - a);
        f2 = f(x2);
      }
    }
    const double mid = 0.5 * (a + b);
    sol.ev[c] = f(mid) <= best ? mid : best_ev;
  }
  return sol;
}

struct BracketFrame {
  LinearImage image;  ///< radiometrically linear values, 1 = sensor saturation
  double shutter_seconds = 1.0;
};

struct MergeResult {
  LinearImage radiance;
  /// Pixels where every frame was saturated; they carry the shortest exposure's estimate.
  Mask saturated;
};

/// Hat-weighted (w = 1 - |2x - 1|) merge of unsaturated samples, x / t per frame.
inline MergeResult merge_brackets(const std::vector<BracketFrame>& frames, double saturation_threshold = 0.98) {
  require(!frames.empty(), "merge_brackets: empty bracket");
  require(saturation_threshold > 0 && saturation_threshold <= 1, "merge_brackets: threshold must lie in (0, 1]");
  const int w = frames[0].image.width(), h = frames[0].image.height();
  std::set<double> times;
  std::size_t shortest = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    require(frames[i].image.same_shape(w, h), "merge_brackets: frames differ in size");
    require(frames[i].shutter_seconds > 0, "merge_brackets: shutter times must be positive");
    require(times.insert(frames[i].shutter_seconds).second, "merge_brackets: shutter times must be distinct");
    if (frames[i].shutter_seconds < frames[shortest].shutter_seconds) shortest = i;
  }

  MergeResult out{LinearImage(w, h), Mask(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool all_saturated = true;
      for (int c = 0; c < 3; ++c) {
        double num = 0, den = 0;
        bool channel_saturated = true;
        for (const auto& f : frames) {
          const double v = f.image.at(x, y, c);
          if (v >= saturation_threshold) continue;
          channel_saturated = false;
          const double wt = 1.0 - std::abs(2.0 * v - 1.0);
          num += wt * v / f.shutter_seconds;
          den += wt;
        }
        double value;
        if (channel_saturated) {
          const auto& f = frames[shortest];
          value = f.image.at(x, y, c) / f.shutter_seconds;
        } else if (den > 0) {
          value = num / den;
        } else {
          // only zero-weight samples (black); take the longest unsaturated exposure
          value = 0;
          double best_t = -1;
          for (const auto& f : frames) {
            const double v = f.image.at(x, y, c);
            if (v < saturation_threshold && f.shutter_seconds > best_t) {
              best_t = f.shutter_seconds;
              value = v / f.shutter_seconds;
            }
          }
        }
        all_saturated = all_saturated && channel_saturated;
        out.radiance.at(x, y, c) = value;
      }
      out.saturated.set(x, y, all_saturated);
    }
  }
  return out;
}

struct ColorTransform {
  Mat3 matrix = Mat3::Identity();
  double residual_rms = 0;

  Rgb apply(const Rgb& c) const { return (matrix * c.matrix()).array(); }

  LinearImage apply(const LinearImage& img) const {
    LinearImage out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) set_pixel(out, x, y, apply(pixel(img, x, y)).max(0.0));
    return out;
  }
};

/// Least-squares M with M * src_i ~= dst_i over N >= 3 patch means.
inline ColorTransform fit_color_transform(const std::vector<Rgb>& src, const std::vector<Rgb>& dst) {
  require(src.size() == dst.size(), "fit_color_transform: patch counts differ");
  require(src.size() >= 3, "fit_color_transform: need at least 3 patches (rank 3)");
  const auto n = static_cast<Eigen::Index>(src.size());
  Eigen::MatrixX3d a(n, 3), b(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    a.row(i) = src[i].matrix().transpose();
    b.row(i) = dst[i].matrix().transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixX3d> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (!(s(2) > 0) || s(0) / s(2) > 1e12)
    throw ValidationError("fit_color_transform: source patches are rank deficient");
  const Mat3 mt = svd.solve(b);
  ColorTransform t;
  t.matrix = mt.transpose();
  t.residual_rms = std::sqrt((a * mt - b).squaredNorm() / static_cast<double>(3 * n));
  return t;
}

}  // namespace relit
