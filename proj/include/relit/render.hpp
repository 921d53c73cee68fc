#pragma once

// Direct illumination from an environment map with shadow rays.
//
// Shading is split into two steps so the inverse renderer can differentiate through it:
// prepare_shading() draws the light directions, their MIS weights and visibility
// (everything that is held fixed), and shade() evaluates the estimator for given
// material textures and environment texels.

#include <relit/bvh.hpp>
#include <relit/camera.hpp>
#include <relit/envmap.hpp>
#include <relit/parallel.hpp>
#include <relit/texture.hpp>

#include <memory>
#include <optional>
#include <vector>

namespace relit {

struct SceneAssets {
  std::shared_ptr<const Bvh> geometry;
  MaterialTextures materials;
  EnvironmentMap env;

  SceneAssets() = default;
  SceneAssets(Mesh mesh, MaterialTextures mats, EnvironmentMap environment)
      : geometry(std::make_shared<const Bvh>(std::move(mesh))),
        materials(std::move(mats)),
        env(std::move(environment)) {
    materials.validate();
  }
  SceneAssets(std::shared_ptr<const Bvh> bvh, MaterialTextures mats, EnvironmentMap environment)
      : geometry(std::move(bvh)), materials(std::move(mats)), env(std::move(environment)) {
    require(geometry != nullptr, "scene assets need geometry");
    materials.validate();
  }
};

struct LightSample {
  Vec3 wi;
  double cos_theta = 0;
  double weight = 0;  ///< 1 / (N (pdf_env + pdf_cos + pdf_lobe)), balance heuristic
  TexelLookup env;
};

/// Frozen part of one direct-illumination estimate at a surface point.
struct ShadingPoint {
  Vec3 position;
  Vec3 normal;  ///< shading normal, flipped towards wo
  Vec3 wo;
  MaterialLookup material;
  std::vector<LightSample> samples;  ///< only unoccluded samples above the horizon
};

/// Draws `n_samples` directions from each of three strategies (environment luminance,
/// cosine hemisphere, GGX lobe at the hit's roughness) and combines them with the
/// balance heuristic. Each set is stratified along its first sampling dimension.
inline ShadingPoint prepare_shading(const SceneAssets& assets, const Hit& hit, const Vec3& wo, int n_samples,
                                    Rng& rng) {
  require(n_samples >= 1, "shading needs at least one sample");
  ShadingPoint sp;
  sp.position = hit.position;
  sp.wo = wo;
  sp.normal = hit.shading_normal.dot(wo) < 0 ? Vec3(-hit.shading_normal) : hit.shading_normal;
  sp.material = assets.materials.lookup(hit.uv);
  const EnvironmentMap& env = assets.env;
  const bool env_sampling = env.can_sample();
  const bool lobe_sampling = assets.materials.model == BrdfModel::kPrincipled;
  const double r = std::clamp(assets.materials.sample(sp.material).roughness, kMinRoughness, 1.0);
  const double alpha = r * r;
  const double inv_n = 1.0 / n_samples;

  auto lobe_pdf = [&](const Vec3& wi) {
    if (!lobe_sampling) return 0.0;
    const Vec3 h = (wi + sp.wo).normalized();
    const double mu_h = sp.normal.dot(h), oh = h.dot(sp.wo);
    if (mu_h <= 0 || oh <= 0) return 0.0;
    return detail::ggx_d(mu_h, alpha) * mu_h / (4.0 * oh);
  };
  auto record = [&](const Vec3& wi) {
    const double cos_theta = sp.normal.dot(wi);
    if (cos_theta <= 0) return;
    if (assets.geometry->occluded(sp.position, wi)) return;
    const UnitDirection d = UnitDirection::normalize(wi);
    const double pdf = (env_sampling ? env.pdf(d) : 0.0) + cos_theta * kInvPi + lobe_pdf(d.vec());
    sp.samples.push_back({d.vec(), cos_theta, inv_n / pdf, env.lookup(dir_to_uv(d))});
  };

  if (env_sampling) {
    for (int k = 0; k < n_samples; ++k) record(env.sample_direction((k + uniform01(rng)) * inv_n, rng).first.vec());
  }
  Vec3 t, b;
  make_frame(sp.normal, t, b);
  for (int k = 0; k < n_samples; ++k) {
    const double u1 = (k + uniform01(rng)) * inv_n, u2 = uniform01(rng);
    const double rad = std::sqrt(u1), phi = 2.0 * kPi * u2;
    record((rad * std::cos(phi) * t + rad * std::sin(phi) * b + std::sqrt(std::max(0.0, 1.0 - u1)) * sp.normal)
               .normalized());
  }
  if (lobe_sampling) {
    for (int k = 0; k < n_samples; ++k) {
      const double u1 = (k + uniform01(rng)) * inv_n, u2 = uniform01(rng);
      const double cos2 = (1.0 - u1) / (1.0 + (alpha * alpha - 1.0) * u1);
      const double ch = std::sqrt(cos2), sh = std::sqrt(std::max(0.0, 1.0 - cos2));
      const double phi = 2.0 * kPi * u2;
      const Vec3 h = (sh * std::cos(phi) * t + sh * std::sin(phi) * b + ch * sp.normal).normalized();
      const double oh = h.dot(sp.wo);
      if (oh <= 0) continue;
      record((2.0 * oh * h - sp.wo).normalized());
    }
  }
  return sp;
}

/// Sparse gradient sink: receives d(radiance)/d(parameter) scaled by the upstream gradient.
struct ShadingGradientSink {
  virtual ~ShadingGradientSink() = default;
  virtual void albedo(int texel, int channel, double value) = 0;
  virtual void roughness(int texel, double value) = 0;
  virtual void metallic(int texel, double value) = 0;
  virtual void env(int texel, int channel, double value) = 0;
};

/// Evaluates the frozen estimator. When `sink` is set, pushes upstream-weighted
/// derivatives for every texel the estimate touches.
inline Rgb shade(const MaterialTextures& materials, const EnvironmentMap& env, const ShadingPoint& sp,
                 const Rgb& upstream = Rgb::Zero(), ShadingGradientSink* sink = nullptr) {
  const MaterialSample mat = materials.sample(sp.material);
  Rgb radiance = Rgb::Zero();
  Rgb d_albedo = Rgb::Zero(), d_rough = Rgb::Zero(), d_metal = Rgb::Zero();
  for (const auto& s : sp.samples) {
    const Rgb li = env.eval(s.env);
    const BrdfEval f = eval_brdf(mat, s.wi, sp.wo, sp.normal, materials.model);
    const double k = s.cos_theta * s.weight;
    radiance += li * f.value * k;
    if (sink) {
      d_albedo += li * f.d_albedo * k;
      d_rough += li * f.d_roughness * k;
      d_metal += li * f.d_metallic * k;
      const Rgb de = upstream * f.value * k;
      for (int q = 0; q < 4; ++q)
        if (s.env.weight[q] != 0)
          for (int c = 0; c < 3; ++c) sink->env(s.env.texel[q], c, s.env.weight[q] * de[c]);
    }
  }
  if (sink) {
    const Rgb ga = upstream * d_albedo;
    const double gr = (upstream * d_rough).sum();
    const double gm = (upstream * d_metal).sum();
    for (int q = 0; q < 4; ++q) {
      const auto& la = sp.material.albedo;
      if (la.weight[q] != 0)
        for (int c = 0; c < 3; ++c) sink->albedo(la.texel[q], c, la.weight[q] * ga[c]);
      if (sp.material.roughness.weight[q] != 0)
        sink->roughness(sp.material.roughness.texel[q], sp.material.roughness.weight[q] * gr);
      if (sp.material.metallic.weight[q] != 0)
        sink->metallic(sp.material.metallic.texel[q], sp.material.metallic.weight[q] * gm);
    }
  }
  return radiance;
}

/// Unbiased direct-illumination estimate at a hit seen from direction wo.
inline Rgb shade_direct(const SceneAssets& assets, const Hit& hit, const Vec3& wo, int n_samples, Rng& rng) {
  return shade(assets.materials, assets.env, prepare_shading(assets, hit, wo, n_samples, rng));
}

struct RenderSettings {
  int width = 64;
  int height = 64;
  int spp = 16;
  int shading_samples = 1;
  std::uint64_t seed = 0;
  int threads = 0;
};

struct RenderResult {
  LinearImage image;
  /// Pixels where at least half of the primary samples hit the mesh.
  Mask coverage;
};

/// Stratified primary rays; covered pixels hold the mean radiance of their hitting
/// samples, the rest are zero. Pixel streams are seeded from (seed, pixel index).
inline RenderResult render_image(const SceneAssets& assets, const Camera& cam, const RenderSettings& s) {
  require(s.spp >= 1 && s.width > 0 && s.height > 0, "render: spp and image size must be positive");
  RenderResult out{LinearImage(s.width, s.height), Mask(s.width, s.height)};
  const int grid = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(s.spp))));
  const std::size_t n_pixels = static_cast<std::size_t>(s.width) * s.height;
  parallel_chunks(n_pixels, 64, s.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      const int px = static_cast<int>(p % s.width), py = static_cast<int>(p / s.width);
      Rng rng = make_stream(s.seed, p);
      Rgb sum = Rgb::Zero();
      int hits = 0;
      for (int k = 0; k < s.spp; ++k) {
        double jx, jy;
        if (k < grid * grid) {
          jx = ((k % grid) + uniform01(rng)) / grid;
          jy = ((k / grid) + uniform01(rng)) / grid;
        } else {
          jx = uniform01(rng);
          jy = uniform01(rng);
        }
        const Ray ray = cam.pixel_ray(Vec2(px + jx, py + jy));
        const auto hit = assets.geometry->intersect(ray);
        if (!hit) continue;
        ++hits;
        sum += shade_direct(assets, *hit, -ray.dir, s.shading_samples, rng);
      }
      if (2 * hits >= s.spp && hits > 0) {
        set_pixel(out.image, px, py, sum / hits);
        out.coverage.set(px, py, true);
      }
    }
  });
  return out;
}

}  // namespace relit
