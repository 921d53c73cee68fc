#pragma once

#include <relit/error.hpp>
#include <relit/math.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace relit {

/// Row-major interleaved raster with a fixed channel count.
template <typename T, int Channels>
class Image {
 public:
  using value_type = T;
  static constexpr int kChannels = Channels;

  Image() = default;
  Image(int width, int height, T fill = T{}) : width_(width), height_(height) {
    require(width >= 0 && height >= 0, "image dimensions must be non-negative");
    data_.assign(static_cast<std::size_t>(width) * height * Channels, fill);
  }
  Image(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    require(data_.size() == static_cast<std::size_t>(width) * height * Channels,
            "image data length does not match dimensions");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const { return data_.empty(); }

  T& at(int x, int y, int c) { return data_[index(x, y) + c]; }
  const T& at(int x, int y, int c) const { return data_[index(x, y) + c]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  bool same_shape(int w, int h) const { return w == width_ && h == height_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * Channels;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Linear radiance, RGB.
using LinearImage = Image<double, 3>;
/// 8-bit display values, RGB.
using TonemappedImage = Image<std::uint8_t, 3>;
/// Single channel real raster (perceptual distance maps, scalar textures).
using ScalarImage = Image<double, 1>;

inline Rgb pixel(const LinearImage& img, int x, int y) {
  return Rgb(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2));
}

inline void set_pixel(LinearImage& img, int x, int y, const Rgb& c) {
  for (int k = 0; k < 3; ++k) img.at(x, y, k) = c[k];
}

/// Throws unless every component is finite and non-negative.
inline void check_linear(const LinearImage& img, const std::string& what = "image") {
  for (double v : img.data()) {
    if (!std::isfinite(v) || v < 0.0)
      throw ValidationError(what + " has a negative or non-finite component");
  }
}

class Mask {
 public:
  Mask() = default;
  Mask(int width, int height, bool fill = false)
      : width_(width), height_(height),
        bits_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {
    require(width >= 0 && height >= 0, "mask dimensions must be non-negative");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool same_shape(int w, int h) const { return w == width_ && h == height_; }

  bool operator()(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool value) { bits_[static_cast<std::size_t>(y) * width_ + x] = value ? 1 : 0; }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits_) n += b;
    return n;
  }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Zeroes every channel of background pixels; foreground stays untouched.
template <typename T, int C>
Image<T, C> apply_mask_zero(Image<T, C> img, const Mask& mask) {
  require(mask.same_shape(img.width(), img.height()), "mask dimensions do not match image");
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (!mask(x, y))
        for (int c = 0; c < C; ++c) img.at(x, y, c) = T{};
  return img;
}

/// Foreground where the first channel exceeds 127.
inline Mask mask_from_tonemapped(const TonemappedImage& img) {
  Mask m(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) m.set(x, y, img.at(x, y, 0) > 127);
  return m;
}

inline TonemappedImage mask_to_tonemapped(const Mask& mask) {
  TonemappedImage img(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = mask(x, y) ? 255 : 0;
  return img;
}

}  // namespace relit
