#pragma once

// Equirectangular environment maps.
//
// Direction <-> uv convention: +Z maps to the top border (v = 0), -Z to the bottom,
// +X to the center (0.5, 0.5), -X to the left/right border, +Y to (0.25, 0.5) and
// -Y to (0.75, 0.5). u grows to the right, v grows downwards.

#include <relit/error.hpp>
#include <relit/image.hpp>
#include <relit/math.hpp>

#include <array>
#include <utility>
#include <vector>

namespace relit {

class UnitDirection {
 public:
  UnitDirection() = default;
  UnitDirection(double x, double y, double z) : v_(x, y, z) { check(); }
  explicit UnitDirection(const Vec3& v) : v_(v) { check(); }

  static UnitDirection normalize(const Vec3& v) {
    require(v.allFinite() && v.squaredNorm() > 0, "cannot normalize a zero or non-finite vector");
    return UnitDirection(v.normalized());
  }

  double x() const { return v_.x(); }
  double y() const { return v_.y(); }
  double z() const { return v_.z(); }
  const Vec3& vec() const { return v_; }
  operator const Vec3&() const { return v_; }

 private:
  void check() const {
    require(v_.allFinite(), "direction is not finite");
    require(std::abs(v_.squaredNorm() - 1.0) <= 2e-9, "direction is not unit length");
  }
  Vec3 v_ = Vec3::UnitZ();
};

inline Vec2 dir_to_uv(const UnitDirection& d) {
  const double z = std::clamp(d.z(), -1.0, 1.0);
  const double v = std::acos(z) * kInvPi;
  if (d.x() == 0.0 && d.y() == 0.0) return {0.5, v};
  double u = 0.5 + std::atan2(-d.y(), d.x()) / (2.0 * kPi);
  u -= std::floor(u);
  return {u, v};
}

inline UnitDirection uv_to_dir(double u, double v) {
  require(std::isfinite(u) && std::isfinite(v) && u >= 0.0 && u < 1.0 && v >= 0.0 && v <= 1.0,
          "uv out of range: u must lie in [0,1), v in [0,1]");
  const double theta = kPi * v;
  const double phi = 2.0 * kPi * (u - 0.5);
  const double s = std::sin(theta);
  return UnitDirection::normalize(Vec3(s * std::cos(phi), -s * std::sin(phi), std::cos(theta)));
}

/// The four texels and weights of a bilinear lookup.
struct TexelLookup {
  std::array<int, 4> texel{};
  std::array<double, 4> weight{};
};

class EnvironmentMap {
 public:
  EnvironmentMap() : EnvironmentMap(LinearImage(2, 1, 0.0)) {}
  explicit EnvironmentMap(LinearImage image) : image_(std::move(image)) {
    require(image_.height() > 0 && image_.width() == 2 * image_.height(),
            "environment map must satisfy width = 2 * height");
    check_linear(image_, "environment map");
    build_sampling();
  }

  static EnvironmentMap constant(int width, int height, const Rgb& value) {
    LinearImage img(width, height);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) set_pixel(img, x, y, value);
    return EnvironmentMap(std::move(img));
  }

  const LinearImage& image() const { return image_; }
  int width() const { return image_.width(); }
  int height() const { return image_.height(); }

  /// Bilinear footprint; u wraps, v clamps. Texel index = y * width + x.
  TexelLookup lookup(const Vec2& uv) const {
    const int w = width(), h = height();
    const double fx = uv.x() * w - 0.5;
    const double fy = uv.y() * h - 0.5;
    const double x0f = std::floor(fx), y0f = std::floor(fy);
    const double tx = fx - x0f, ty = fy - y0f;
    int x0 = static_cast<int>(x0f) % w;
    if (x0 < 0) x0 += w;
    const int x1 = (x0 + 1) % w;
    const int y0 = std::clamp(static_cast<int>(y0f), 0, h - 1);
    const int y1 = std::clamp(static_cast<int>(y0f) + 1, 0, h - 1);
    TexelLookup l;
    l.texel = {y0 * w + x0, y0 * w + x1, y1 * w + x0, y1 * w + x1};
    l.weight = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
    return l;
  }

  Rgb texel(int index) const {
    const auto d = image_.data();
    return Rgb(d[3 * index], d[3 * index + 1], d[3 * index + 2]);
  }

  Rgb eval(const TexelLookup& l) const {
    Rgb c = Rgb::Zero();
    for (int k = 0; k < 4; ++k) c += l.weight[k] * texel(l.texel[k]);
    return c;
  }

  bool can_sample() const { return total_weight_ > 0.0; }

  /// Solid angle of texel row `row` for a single column.
  double texel_solid_angle(int row) const {
    const double h = height();
    return (2.0 * kPi / width()) * (std::cos(kPi * row / h) - std::cos(kPi * (row + 1) / h));
  }

  /// Probability mass of texel (x, y) under luminance sampling.
  double texel_probability(int x, int y) const {
    return can_sample() ? texel_weight_[static_cast<std::size_t>(y) * width() + x] / total_weight_ : 0.0;
  }

  /// Solid-angle density of luminance sampling for a direction.
  double pdf(const UnitDirection& d) const {
    if (!can_sample()) return 0.0;
    const Vec2 uv = dir_to_uv(d);
    const int x = std::min(static_cast<int>(uv.x() * width()), width() - 1);
    const int y = std::min(static_cast<int>(uv.y() * height()), height() - 1);
    return texel_probability(x, y) / texel_solid_angle(y);
  }

  /// Luminance x solid-angle proportional direction; pdf is per steradian.
  std::pair<UnitDirection, double> sample_direction(Rng& rng) const { return sample_direction(uniform01(rng), rng); }

  /// As above with the texel chosen by `u_select` in [0,1), which inverts the row-major
  /// cumulative texel weights; stratifying it stratifies the texel choice.
  std::pair<UnitDirection, double> sample_direction(double u_select, Rng& rng) const {
    if (!can_sample()) throw ValidationError("cannot sample an all-black environment map");
    const int w = width(), h = height();
    const double r1 = std::clamp(u_select, 0.0, 1.0) * total_weight_;
    int y = std::min(static_cast<int>(std::upper_bound(row_cdf_.begin(), row_cdf_.end(), r1) - row_cdf_.begin()),
                     h - 1);
    while (y > 0 && row_cdf_[y] == row_cdf_[y - 1]) --y;
    const auto row_begin = col_cdf_.begin() + static_cast<std::ptrdiff_t>(y) * w;
    const double row_total = *(row_begin + (w - 1));
    const double r2 = std::clamp(r1 - (y > 0 ? row_cdf_[y - 1] : 0.0), 0.0, std::nextafter(row_total, 0.0));
    int x = static_cast<int>(std::upper_bound(row_begin, row_begin + w, r2) - row_begin);
    x = std::min(x, w - 1);
    while (texel_weight_[static_cast<std::size_t>(y) * w + x] <= 0.0 && x > 0) --x;

    const double u = (x + uniform01(rng)) / w;
    const double z0 = std::cos(kPi * y / h), z1 = std::cos(kPi * (y + 1) / h);
    const double z = std::clamp(z0 - uniform01(rng) * (z0 - z1), -1.0, 1.0);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = 2.0 * kPi * (u - 0.5);
    const UnitDirection dir = UnitDirection::normalize(Vec3(s * std::cos(phi), -s * std::sin(phi), z));
    return {dir, texel_probability(x, y) / texel_solid_angle(y)};
  }

 private:
  void build_sampling() {
    const int w = width(), h = height();
    texel_weight_.assign(static_cast<std::size_t>(w) * h, 0.0);
    col_cdf_.assign(texel_weight_.size(), 0.0);
    row_cdf_.assign(h, 0.0);
    double acc_rows = 0.0;
    for (int y = 0; y < h; ++y) {
      const double omega = texel_solid_angle(y);
      double acc = 0.0;
      for (int x = 0; x < w; ++x) {
        const double wt = luminance(pixel(image_, x, y)) * omega;
        texel_weight_[static_cast<std::size_t>(y) * w + x] = wt;
        acc += wt;
        col_cdf_[static_cast<std::size_t>(y) * w + x] = acc;
      }
      acc_rows += acc;
      row_cdf_[y] = acc_rows;
    }
    total_weight_ = acc_rows;
  }

  LinearImage image_;
  std::vector<double> texel_weight_;
  std::vector<double> col_cdf_;
  std::vector<double> row_cdf_;
  double total_weight_ = 0.0;
};

inline Rgb sample_env(const EnvironmentMap& env, const UnitDirection& d) {
  return env.eval(env.lookup(dir_to_uv(d)));
}

/// Resamples `env` so that output(d) = input(R^T d).
inline EnvironmentMap rotate_env(const EnvironmentMap& env, const Mat3& rotation) {
  require(is_rotation(rotation), "rotate_env: matrix is not a rotation");
  const int w = env.width(), h = env.height();
  const Mat3 rt = rotation.transpose();
  LinearImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Vec3 d = uv_to_dir((x + 0.5) / w, (y + 0.5) / h);
      set_pixel(out, x, y, sample_env(env, UnitDirection::normalize(rt * d)));
    }
  }
  return EnvironmentMap(std::move(out));
}

namespace detail {

// Overlap weights between two partitions of an interval given by their breakpoints.
inline std::vector<std::vector<std::pair<int, double>>> overlap_weights(
    const std::vector<double>& out_edges, const std::vector<double>& in_edges) {
  const int n_out = static_cast<int>(out_edges.size()) - 1;
  const int n_in = static_cast<int>(in_edges.size()) - 1;
  std::vector<std::vector<std::pair<int, double>>> weights(n_out);
  int start = 0;
  for (int o = 0; o < n_out; ++o) {
    const double lo = std::min(out_edges[o], out_edges[o + 1]);
    const double hi = std::max(out_edges[o], out_edges[o + 1]);
    while (start < n_in && std::max(in_edges[start], in_edges[start + 1]) <= lo) ++start;
    for (int i = start; i < n_in; ++i) {
      const double a = std::min(in_edges[i], in_edges[i + 1]);
      const double b = std::max(in_edges[i], in_edges[i + 1]);
      if (a >= hi) break;
      const double overlap = std::min(b, hi) - std::max(a, lo);
      if (overlap > 0) weights[o].emplace_back(i, overlap);
    }
  }
  return weights;
}

}  // namespace detail

/// Solid-angle weighted box resampling; preserves total flux.
inline EnvironmentMap resize_env(const EnvironmentMap& env, int new_width, int new_height) {
  require(new_height > 0 && new_width == 2 * new_height, "resize_env: new size must satisfy width = 2 * height");
  const int w = env.width(), h = env.height();
  // u breakpoints and -cos(theta) breakpoints (both increasing).
  auto u_edges = [](int n) {
    std::vector<double> e(n + 1);
    for (int i = 0; i <= n; ++i) e[i] = static_cast<double>(i) / n;
    return e;
  };
  auto z_edges = [](int n) {
    std::vector<double> e(n + 1);
    for (int i = 0; i <= n; ++i) e[i] = -std::cos(kPi * i / n);
    e[0] = -1.0;
    e[n] = 1.0;
    return e;
  };
  const auto wx = detail::overlap_weights(u_edges(new_width), u_edges(w));
  const auto wy = detail::overlap_weights(z_edges(new_height), z_edges(h));

  const LinearImage& src = env.image();
  LinearImage tmp(new_width, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < new_width; ++x) {
      Rgb acc = Rgb::Zero();
      double total = 0;
      for (auto [i, wt] : wx[x]) {
        acc += wt * pixel(src, i, y);
        total += wt;
      }
      set_pixel(tmp, x, y, acc / total);
    }
  }
  LinearImage out(new_width, new_height);
  for (int y = 0; y < new_height; ++y) {
    for (int x = 0; x < new_width; ++x) {
      Rgb acc = Rgb::Zero();
      double total = 0;
      for (auto [j, wt] : wy[y]) {
        acc += wt * pixel(tmp, x, j);
        total += wt;
      }
      set_pixel(out, x, y, acc / total);
    }
  }
  return EnvironmentMap(std::move(out));
}

}  // namespace relit
