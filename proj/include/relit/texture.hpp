#pragma once

#include <relit/brdf.hpp>
#include <relit/envmap.hpp>
#include <relit/image.hpp>

namespace relit {

/// Bilinear footprint with clamp-to-edge addressing. Texel index = y * width + x.
inline TexelLookup clamp_lookup(int width, int height, const Vec2& uv) {
  const double fx = uv.x() * width - 0.5, fy = uv.y() * height - 0.5;
  const double x0f = std::floor(fx), y0f = std::floor(fy);
  const double tx = fx - x0f, ty = fy - y0f;
  const int xa = std::clamp(static_cast<int>(x0f), 0, width - 1);
  const int xb = std::clamp(static_cast<int>(x0f) + 1, 0, width - 1);
  const int ya = std::clamp(static_cast<int>(y0f), 0, height - 1);
  const int yb = std::clamp(static_cast<int>(y0f) + 1, 0, height - 1);
  TexelLookup l;
  l.texel = {ya * width + xa, ya * width + xb, yb * width + xa, yb * width + xb};
  l.weight = {(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty};
  return l;
}

struct MaterialLookup {
  TexelLookup albedo, roughness, metallic;
};

/// Spatially varying albedo / roughness / metallic, addressed by mesh uv.
struct MaterialTextures {
  Image<double, 3> albedo;
  ScalarImage roughness;
  ScalarImage metallic;
  BrdfModel model = BrdfModel::kPrincipled;

  static MaterialTextures uniform(int size, const Rgb& albedo, double roughness, double metallic,
                                  BrdfModel model = BrdfModel::kPrincipled) {
    MaterialTextures t{Image<double, 3>(size, size), ScalarImage(size, size, roughness),
                       ScalarImage(size, size, metallic), model};
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        for (int c = 0; c < 3; ++c) t.albedo.at(x, y, c) = albedo[c];
    return t;
  }

  void validate() const {
    auto square_pow2 = [](int w, int h) { return w == h && w > 0 && (w & (w - 1)) == 0; };
    require(square_pow2(albedo.width(), albedo.height()) && square_pow2(roughness.width(), roughness.height()) &&
                square_pow2(metallic.width(), metallic.height()),
            "material textures must be square with power-of-two resolution");
    for (double v : albedo.data()) require(std::isfinite(v) && v >= 0 && v <= 1, "albedo outside [0,1]");
    for (double v : roughness.data())
      require(std::isfinite(v) && v >= kMinRoughness && v <= 1, "roughness outside [0.03,1]");
    for (double v : metallic.data()) require(std::isfinite(v) && v >= 0 && v <= 1, "metallic outside [0,1]");
  }

  /// Projects every texel back into its valid range.
  void clamp_ranges() {
    for (double& v : albedo.data()) v = std::clamp(v, 0.0, 1.0);
    for (double& v : roughness.data()) v = std::clamp(v, kMinRoughness, 1.0);
    for (double& v : metallic.data()) v = std::clamp(v, 0.0, 1.0);
  }

  MaterialLookup lookup(const Vec2& uv) const {
    return {clamp_lookup(albedo.width(), albedo.height(), uv),
            clamp_lookup(roughness.width(), roughness.height(), uv),
            clamp_lookup(metallic.width(), metallic.height(), uv)};
  }

  MaterialSample sample(const MaterialLookup& l) const {
    MaterialSample m{Rgb::Zero(), 0.0, 0.0};
    const auto a = albedo.data();
    const auto r = roughness.data();
    const auto mt = metallic.data();
    for (int k = 0; k < 4; ++k) {
      for (int c = 0; c < 3; ++c) m.albedo[c] += l.albedo.weight[k] * a[3 * l.albedo.texel[k] + c];
      m.roughness += l.roughness.weight[k] * r[l.roughness.texel[k]];
      m.metallic += l.metallic.weight[k] * mt[l.metallic.texel[k]];
    }
    return m;
  }
};

}  // namespace relit
