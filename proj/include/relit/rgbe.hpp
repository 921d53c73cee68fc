#pragma once

// Radiance HDR (RGBE) codec.

#include <relit/error.hpp>
#include <relit/image.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace relit {

using RgbeBytes = std::array<std::uint8_t, 4>;

/// Shared-exponent encoding with rounded mantissas.
inline RgbeBytes encode_rgbe(double r, double g, double b) {
  const double v = std::max({r, g, b});
  if (!(v >= 1e-32)) return {0, 0, 0, 0};
  int e = 0;
  std::frexp(v, &e);
  double scale = std::ldexp(256.0, -e);
  if (std::lround(v * scale) > 255) {
    ++e;
    scale *= 0.5;
  }
  require(e + 128 <= 255, "value too large for RGBE");
  if (e + 128 < 1) return {0, 0, 0, 0};
  auto m = [&](double x) {
    return static_cast<std::uint8_t>(std::clamp<long>(std::lround(std::max(x, 0.0) * scale), 0, 255));
  };
  return {m(r), m(g), m(b), static_cast<std::uint8_t>(e + 128)};
}

inline Rgb decode_rgbe(const RgbeBytes& p) {
  if (p[3] == 0) return Rgb::Zero();
  const double f = std::ldexp(1.0, static_cast<int>(p[3]) - (128 + 8));
  return Rgb(p[0] * f, p[1] * f, p[2] * f);
}

namespace detail {

inline std::string read_header_line(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("malformed header (unexpected end): " + path);
  return line;
}

inline void read_rle_scanline(std::istream& in, int width, std::vector<std::uint8_t>& line,
                              const std::string& path) {
  auto fail = [&] { throw ValidationError("truncated scanline in " + path); };
  for (int c = 0; c < 4; ++c) {
    int x = 0;
    while (x < width) {
      const int count = in.get();
      if (count == EOF) fail();
      if (count > 128) {
        const int run = count - 128;
        const int value = in.get();
        if (value == EOF || x + run > width) fail();
        for (int k = 0; k < run; ++k) line[(x++) * 4 + c] = static_cast<std::uint8_t>(value);
      } else {
        if (count == 0 || x + count > width) fail();
        for (int k = 0; k < count; ++k) {
          const int value = in.get();
          if (value == EOF) fail();
          line[(x++) * 4 + c] = static_cast<std::uint8_t>(value);
        }
      }
    }
  }
}

// Flat pixels, including the old-style (1,1,1,n) repeat records.
inline void read_flat_scanline(std::istream& in, int width, std::vector<std::uint8_t>& line,
                               const std::uint8_t* first, const std::string& path) {
  int x = 0;
  int shift = 0;
  std::uint8_t px[4];
  bool have_first = first != nullptr;
  while (x < width) {
    if (have_first) {
      std::copy(first, first + 4, px);
      have_first = false;
    } else if (!in.read(reinterpret_cast<char*>(px), 4)) {
      throw ValidationError("truncated scanline in " + path);
    }
    if (px[0] == 1 && px[1] == 1 && px[2] == 1) {
      if (x == 0) throw ValidationError("malformed run in " + path);
      const int run = px[3] << shift;
      if (x + run > width) throw ValidationError("truncated scanline in " + path);
      for (int k = 0; k < run; ++k, ++x)
        std::copy(&line[(x - 1) * 4], &line[(x - 1) * 4] + 4, &line[x * 4]);
      shift += 8;
    } else {
      std::copy(px, px + 4, &line[x * 4]);
      ++x;
      shift = 0;
    }
  }
}

inline void write_rle_channel(std::ostream& out, const std::uint8_t* data, int width) {
  constexpr int kMinRun = 4;
  int cur = 0;
  while (cur < width) {
    int beg_run = cur;
    int run_count = 0;
    int old_run_count = 0;
    while (run_count < kMinRun && beg_run < width) {
      beg_run += run_count;
      old_run_count = run_count;
      run_count = 1;
      while (beg_run + run_count < width && run_count < 127 &&
             data[beg_run * 4] == data[(beg_run + run_count) * 4])
        ++run_count;
    }
    if (old_run_count > 1 && old_run_count == beg_run - cur) {
      out.put(static_cast<char>(128 + old_run_count));
      out.put(static_cast<char>(data[cur * 4]));
      cur = beg_run;
    }
    while (cur < beg_run) {
      int nonrun = std::min(beg_run - cur, 128);
      out.put(static_cast<char>(nonrun));
      for (int k = 0; k < nonrun; ++k) out.put(static_cast<char>(data[(cur + k) * 4]));
      cur += nonrun;
    }
    if (run_count >= kMinRun) {
      out.put(static_cast<char>(128 + run_count));
      out.put(static_cast<char>(data[beg_run * 4]));
      cur += run_count;
    }
  }
}

}  // namespace detail

inline LinearImage read_rgbe(const std::filesystem::path& path) {
  const std::string name = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("missing file: " + name);

  const std::string magic = detail::read_header_line(in, name);
  if (magic.rfind("#?RADIANCE", 0) != 0 && magic.rfind("#?RGBE", 0) != 0)
    throw ValidationError("malformed header (bad magic) in " + name);
  for (;;) {
    const std::string line = detail::read_header_line(in, name);
    if (line.empty()) break;
    if (line.rfind("FORMAT=", 0) == 0 && line != "FORMAT=32-bit_rle_rgbe")
      throw ValidationError("malformed header (unsupported " + line + ") in " + name);
  }
  const std::string res = detail::read_header_line(in, name);
  std::istringstream rs(res);
  std::string ya, xa;
  int h = 0, w = 0;
  if (!(rs >> ya >> h >> xa >> w)) throw ValidationError("malformed resolution line in " + name);
  if (ya != "-Y" || xa != "+X") throw ValidationError("unsupported orientation line '" + res + "' in " + name);
  if (w <= 0 || h <= 0) throw ValidationError("malformed resolution line in " + name);

  LinearImage img(w, h);
  std::vector<std::uint8_t> line(static_cast<std::size_t>(w) * 4);
  for (int y = 0; y < h; ++y) {
    std::uint8_t head[4];
    if (!in.read(reinterpret_cast<char*>(head), 4)) throw ValidationError("truncated scanline in " + name);
    if (w >= 8 && w < 32768 && head[0] == 2 && head[1] == 2 && !(head[2] & 0x80)) {
      if (((head[2] << 8) | head[3]) != w) throw ValidationError("scanline width mismatch in " + name);
      detail::read_rle_scanline(in, w, line, name);
    } else {
      detail::read_flat_scanline(in, w, line, head, name);
    }
    for (int x = 0; x < w; ++x) {
      const Rgb c = decode_rgbe({line[x * 4], line[x * 4 + 1], line[x * 4 + 2], line[x * 4 + 3]});
      set_pixel(img, x, y, c);
    }
  }
  return img;
}

/// Writes RLE scanlines (flat when the width is outside the RLE range).
inline void write_rgbe(const LinearImage& img, const std::filesystem::path& path) {
  check_linear(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y " << img.height() << " +X " << img.width() << "\n";
  const int w = img.width();
  std::vector<std::uint8_t> line(static_cast<std::size_t>(w) * 4);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      const auto p = encode_rgbe(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2));
      std::copy(p.begin(), p.end(), &line[x * 4]);
    }
    if (w < 8 || w >= 32768) {
      out.write(reinterpret_cast<const char*>(line.data()), static_cast<std::streamsize>(line.size()));
      continue;
    }
    out.put(2);
    out.put(2);
    out.put(static_cast<char>(w >> 8));
    out.put(static_cast<char>(w & 0xff));
    for (int c = 0; c < 4; ++c) detail::write_rle_channel(out, line.data() + c, w);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace relit
