#pragma once

#include <relit/error.hpp>
#include <relit/image.hpp>

#include <png.h>

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

namespace relit {

namespace detail {

struct PngImage {
  png_image image;
  PngImage() {
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&image); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

inline void begin_png_read(PngImage& png, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("missing file: " + path.string());
  if (!png_image_begin_read_from_file(&png.image, path.c_str()))
    throw IoError("cannot decode PNG " + path.string() + ": " + png.image.message);
  if (png.image.format & PNG_FORMAT_FLAG_LINEAR)
    throw ValidationError("unsupported bit depth (16-bit PNG): " + path.string());
}

template <int C>
Image<std::uint8_t, C> finish_png_read(PngImage& png, png_uint_32 format,
                                       const std::filesystem::path& path) {
  png.image.format = format;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(png.image));
  if (!png_image_finish_read(&png.image, nullptr, buffer.data(), 0, nullptr))
    throw IoError("cannot decode PNG " + path.string() + ": " + png.image.message);
  return Image<std::uint8_t, C>(static_cast<int>(png.image.width),
                                static_cast<int>(png.image.height), std::move(buffer));
}

template <int C>
void write_png(const Image<std::uint8_t, C>& img, const std::filesystem::path& path,
               png_uint_32 format) {
  PngImage png;
  png.image.width = static_cast<png_uint_32>(img.width());
  png.image.height = static_cast<png_uint_32>(img.height());
  png.image.format = format;
  if (!png_image_write_to_file(&png.image, path.c_str(), 0, img.data().data(), 0, nullptr))
    throw IoError("cannot write PNG " + path.string() + ": " + png.image.message);
}

}  // namespace detail

/// Reads an 8-bit RGB PNG. Alpha, grayscale and 16-bit files are rejected.
inline TonemappedImage read_png_rgb(const std::filesystem::path& path) {
  detail::PngImage png;
  detail::begin_png_read(png, path);
  const auto fmt = png.image.format;
  if (fmt & PNG_FORMAT_FLAG_ALPHA)
    throw ValidationError("unsupported channel layout (alpha channel): " + path.string());
  if (!(fmt & PNG_FORMAT_FLAG_COLOR))
    throw ValidationError("unsupported channel layout (not RGB): " + path.string());
  return detail::finish_png_read<3>(png, PNG_FORMAT_RGB, path);
}

inline void write_png_rgb(const TonemappedImage& img, const std::filesystem::path& path) {
  detail::write_png(img, path, PNG_FORMAT_RGB);
}

/// Mask PNG: 8-bit gray or RGB, first channel > 127 is foreground.
inline Mask read_mask_png(const std::filesystem::path& path) {
  detail::PngImage png;
  detail::begin_png_read(png, path);
  if (png.image.format & PNG_FORMAT_FLAG_ALPHA)
    throw ValidationError("unsupported channel layout (alpha channel): " + path.string());
  if (png.image.format & PNG_FORMAT_FLAG_COLOR)
    return mask_from_tonemapped(detail::finish_png_read<3>(png, PNG_FORMAT_RGB, path));
  auto gray = detail::finish_png_read<1>(png, PNG_FORMAT_GRAY, path);
  Mask m(gray.width(), gray.height());
  for (int y = 0; y < gray.height(); ++y)
    for (int x = 0; x < gray.width(); ++x) m.set(x, y, gray.at(x, y, 0) > 127);
  return m;
}

inline void write_mask_png(const Mask& mask, const std::filesystem::path& path) {
  Image<std::uint8_t, 1> gray(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) gray.at(x, y, 0) = mask(x, y) ? 255 : 0;
  detail::write_png(gray, path, PNG_FORMAT_GRAY);
}

}  // namespace relit
