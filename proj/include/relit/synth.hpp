#pragma once

// Synthetic object directories: analytic shapes with procedural textures, rendered under
// procedural environments. A truth/ sidecar holds the generating assets.

#include <relit/assets_io.hpp>
#include <relit/dataset.hpp>
#include <relit/photometry.hpp>
#include <relit/render.hpp>

#include <algorithm>

namespace relit {

enum class SynthShape { kSphere, kBox, kCapsule, kComposite };

inline SynthShape parse_shape(const std::string& s) {
  if (s == "sphere") return SynthShape::kSphere;
  if (s == "box") return SynthShape::kBox;
  if (s == "capsule") return SynthShape::kCapsule;
  if (s == "composite") return SynthShape::kComposite;
  throw ValidationError("unknown shape '" + s + "' (sphere, box, capsule, composite)");
}

enum class EnvKind { kOutdoor, kIndoorWindow, kTriLight };

struct SynthEnvironment {
  std::string id;
  std::string category;
  EnvKind kind;
};

inline const std::array<SynthEnvironment, 3>& synth_environments() {
  static const std::array<SynthEnvironment, 3> envs = {{{"sunsky", "outdoor", EnvKind::kOutdoor},
                                                        {"window", "indoor-natural", EnvKind::kIndoorWindow},
                                                        {"trilight", "indoor-artificial", EnvKind::kTriLight}}};
  return envs;
}

struct SynthSpec {
  SynthShape shape = SynthShape::kComposite;
  int resolution = 48;  ///< segments around the sphere
  int texture_size = 64;
  int env_width = 512;
  int n_envs = 3;
  int n_inputs = 16;
  int tests_per_env = 3;
  int width = 80;
  int height = 80;
  int input_spp = 256;
  int gt_spp = 256;
  int shading_samples = 4;
  double k1 = 0.01;
  std::uint64_t seed = 1;
  int threads = 0;
};

namespace detail {

inline double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3 - 2 * t);
}

inline Vec3 dir_from_angles(double azimuth_deg, double elevation_deg) {
  const double a = azimuth_deg * kPi / 180, e = elevation_deg * kPi / 180;
  return {std::cos(e) * std::cos(a), std::cos(e) * std::sin(a), std::sin(e)};
}

inline double angle_between(const Vec3& a, const Vec3& b) { return std::acos(std::clamp(a.dot(b), -1.0, 1.0)); }

inline Rgb environment_radiance(EnvKind kind, const Vec3& d) {
  const double deg = kPi / 180;
  switch (kind) {
    case EnvKind::kOutdoor: {
      Rgb c;
      if (d.z() > 0) {
        const double t = std::sqrt(d.z());
        c = (1 - t) * Rgb(0.75, 0.8, 0.85) + t * Rgb(0.15, 0.3, 0.65);
      } else {
        c = Rgb(0.12, 0.1, 0.08);
      }
      const double a = angle_between(d, dir_from_angles(30, 40));
      c += Rgb(120.0, 110.0, 95.0) * (1 - smoothstep(3 * deg, 5 * deg, a));
      return c;
    }
    case EnvKind::kIndoorWindow: {
      Rgb c = d.z() > 0 ? Rgb(0.2, 0.18, 0.16) : Rgb(0.08, 0.07, 0.06);
      double az = std::atan2(d.y(), d.x()) / deg;
      if (az < 0) az += 360;
      const double el = std::asin(std::clamp(d.z(), -1.0, 1.0)) / deg;
      const double win = smoothstep(145, 150, az) * (1 - smoothstep(205, 210, az)) * smoothstep(0, 5, el) *
                         (1 - smoothstep(45, 50, el));
      c += win * Rgb(3.0, 3.3, 3.8);
      return c;
    }
    case EnvKind::kTriLight: {
      Rgb c = Rgb::Constant(0.04);
      const std::array<std::pair<Vec3, Rgb>, 3> lights = {{{dir_from_angles(0, 30), Rgb(9, 6, 3)},
                                                           {dir_from_angles(120, 60), Rgb(3, 4.5, 9)},
                                                           {dir_from_angles(240, 15), Rgb(6, 6, 6)}}};
      const double sigma = 8 * deg;
      for (const auto& [dir, col] : lights) {
        const double a = angle_between(d, dir);
        c += col * std::exp(-0.5 * a * a / (sigma * sigma));
      }
      return c;
    }
  }
  return Rgb::Zero();
}

}  // namespace detail

/// Procedural environment, quantized to what an RGBE file stores.
inline EnvironmentMap make_environment(EnvKind kind, int width) {
  require(width >= 4 && width % 2 == 0, "environment width must be even and at least 4");
  const int height = width / 2;
  LinearImage img(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const auto d = uv_to_dir((x + 0.5) / width, (y + 0.5) / height);
      set_pixel(img, x, y, detail::environment_radiance(kind, d.vec()));
    }
  return EnvironmentMap(quantize_rgbe(img));
}

/// Triangulated shape with uv charts: the sphere (or capsule) uses the left half of the
/// uv square, the box the right half.
inline Mesh make_synth_mesh(SynthShape shape, int resolution) {
  require(resolution >= 8, "synth resolution must be at least 8");
  const UvRect left{0, 0, 0.5, 1}, right{0.5, 0, 1, 1}, full{};
  const int rings = resolution / 2 + resolution / 2 % 2;
  switch (shape) {
    case SynthShape::kSphere: return make_sphere(Vec3(0, 0, 0.5), 0.5, resolution, rings, full);
    case SynthShape::kBox: return make_box(Vec3(-0.4, -0.4, 0), Vec3(0.4, 0.4, 0.8), resolution / 8, full);
    case SynthShape::kCapsule: return make_capsule(Vec3(0, 0, 0.6), 0.35, 0.5, resolution, rings, full);
    case SynthShape::kComposite: {
      Mesh m = make_sphere(Vec3(0, 0, 0.5), 0.5, resolution, rings, left);
      m.append(make_box(Vec3(0.6, -0.3, 0), Vec3(1.2, 0.3, 0.6), resolution / 8, right));
      return m;
    }
  }
  return {};
}

/// Procedural ground-truth textures. For the composite, u < 0.5 is the sphere chart.
inline MaterialTextures make_synth_textures(SynthShape shape, int size) {
  MaterialTextures t = MaterialTextures::uniform(size, Rgb::Constant(0.5), 0.5, 0.0);
  const std::array<Rgb, 4> bands = {Rgb(0.8, 0.3, 0.2), Rgb(0.25, 0.6, 0.3), Rgb(0.3, 0.4, 0.8),
                                    Rgb(0.85, 0.8, 0.45)};
  const std::array<Rgb, 6> faces = {Rgb(0.7, 0.7, 0.7), Rgb(0.6, 0.25, 0.5), Rgb(0.3, 0.55, 0.6),
                                    Rgb(0.75, 0.55, 0.25), Rgb(0.4, 0.35, 0.3), Rgb(0.5, 0.7, 0.35)};
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double u = (x + 0.5) / size, v = (y + 0.5) / size;
      const bool sphere_chart = shape == SynthShape::kComposite ? u < 0.5 : shape != SynthShape::kBox;
      Rgb albedo;
      double rough, metal = 0.0;
      if (sphere_chart) {
        const double s = shape == SynthShape::kComposite ? u / 0.5 : u;
        const int band = std::min(3, static_cast<int>(v * 4));
        const bool checker = static_cast<int>(s * 8) % 2 == 1;
        albedo = bands[band] * (checker ? 0.6 : 1.0);
        rough = 0.4 + 0.4 * v;
        if (band == 1 && s >= 0.5 && s < 0.75) metal = 0.9;
      } else {
        const double s = shape == SynthShape::kComposite ? (u - 0.5) / 0.5 : u;
        const int face = std::min(1, static_cast<int>(s * 2)) + 2 * std::min(2, static_cast<int>(v * 3));
        const double fs = s * 2 - std::floor(s * 2);
        albedo = faces[face] * (std::abs(fs - 0.5) < 0.12 ? 0.5 : 1.0);
        rough = 0.6;
      }
      for (int c = 0; c < 3; ++c) t.albedo.at(x, y, c) = albedo[c];
      t.roughness.at(x, y, 0) = rough;
      t.metallic.at(x, y, 0) = metal;
    }
  }
  t.albedo = quantize_rgbe(t.albedo);
  t.roughness = quantize_rgbe(t.roughness);
  t.metallic = quantize_rgbe(t.metallic);
  t.validate();
  return t;
}

/// Object center and radius of the synthetic shapes, used to place cameras.
inline std::pair<Vec3, double> synth_framing(SynthShape shape) {
  if (shape == SynthShape::kComposite) return {Vec3(0.35, 0, 0.35), 0.95};
  return {Vec3(0, 0, 0.45), 0.75};
}

inline Camera synth_camera(const SynthSpec& spec, double azimuth_deg, double elevation_deg) {
  const auto [center, radius] = synth_framing(spec.shape);
  const double distance = 3.4 * radius;
  const Vec3 eye = center + distance * detail::dir_from_angles(azimuth_deg, elevation_deg);
  const double half_fov = std::asin(radius / distance) * 1.15;
  const double f = 0.5 * std::min(spec.width, spec.height) / std::tan(half_fov);
  return Camera::look_at(eye, center, Vec3::UnitZ(), f, f, 0.5 * spec.width, 0.5 * spec.height, spec.k1);
}

/// EV that maps the 99th percentile of foreground radiance close to the top of the 8-bit range.
inline double auto_exposure(const std::vector<const RenderResult*>& renders) {
  std::vector<double> values;
  for (const auto* r : renders)
    for (int y = 0; y < r->image.height(); ++y)
      for (int x = 0; x < r->image.width(); ++x)
        if (r->coverage(x, y)) values.push_back(pixel(r->image, x, y).maxCoeff());
  require(!values.empty(), "synth: object not visible in any view");
  const std::size_t k = static_cast<std::size_t>(0.99 * (values.size() - 1));
  std::nth_element(values.begin(), values.begin() + k, values.end());
  const double p99 = std::max(values[k], 1e-6);
  return std::round(8 * std::log2(std::pow(0.92, 2.2) / p99)) / 8;
}

inline std::uint64_t synth_view_seed(std::uint64_t seed, int kind, int index) {
  return splitmix64(seed ^ (0x9e37ULL * static_cast<std::uint64_t>(kind + 1))) + static_cast<std::uint64_t>(index);
}

/// Writes a complete object directory to `out` and returns it loaded.
inline ObjectDataset synth(const SynthSpec& spec, const fs::path& out) {
  require(spec.n_envs >= 2 && spec.n_envs <= 3, "synth needs 2 or 3 environments");
  require(spec.n_inputs >= 8, "synth needs at least 8 input views");
  require(spec.tests_per_env >= 1 && spec.width >= 8 && spec.height >= 8, "synth view settings too small");
  require(spec.input_spp >= 1 && spec.gt_spp >= 1 && spec.shading_samples >= 1, "synth sample counts must be positive");

  const Mesh mesh = make_synth_mesh(spec.shape, spec.resolution);
  const MaterialTextures truth = make_synth_textures(spec.shape, spec.texture_size);
  std::vector<EnvironmentMap> envs;
  for (int e = 0; e < spec.n_envs; ++e) envs.push_back(make_environment(synth_environments()[e].kind, spec.env_width));
  const auto bvh = std::make_shared<const Bvh>(mesh);

  Rng rng = make_stream(spec.seed, 0);
  DatasetContent content;
  nlohmann::json views = nlohmann::json::array();

  // inputs: env 0, azimuths spread around the object at alternating elevations
  std::vector<RenderResult> input_renders;
  const SceneAssets scene0(bvh, truth, envs[0]);
  for (int i = 0; i < spec.n_inputs; ++i) {
    const double az = 360.0 * i / spec.n_inputs + 10 * (uniform01(rng) - 0.5);
    const double el = (i % 2 == 0 ? 15.0 : 40.0) + 6 * (uniform01(rng) - 0.5);
    const Camera cam = synth_camera(spec, az, el);
    RenderSettings rs{spec.width, spec.height, spec.input_spp, spec.shading_samples,
                      synth_view_seed(spec.seed, 0, i), spec.threads};
    input_renders.push_back(render_image(scene0, cam, rs));
    content.inputs.push_back({{}, input_renders.back().coverage, cam});
    views.push_back({{"kind", "input"}, {"index", i}, {"env", 0}, {"seed", rs.seed}, {"spp", rs.spp}});
  }
  std::vector<const RenderResult*> ptrs;
  for (const auto& r : input_renders) ptrs.push_back(&r);
  content.input_exposure = auto_exposure(ptrs);
  for (int i = 0; i < spec.n_inputs; ++i)
    content.inputs[i].image = tone_map(input_renders[i].image, content.input_exposure);

  // held-out views in every environment
  int t = 0;
  for (int e = 0; e < spec.n_envs; ++e) {
    const SceneAssets scene(bvh, truth, envs[e]);
    for (int k = 0; k < spec.tests_per_env; ++k, ++t) {
      const double az = 360.0 * (k + 0.5) / spec.tests_per_env + 37.0 * e + 15 * (uniform01(rng) - 0.5);
      const double el = 20 + 15 * uniform01(rng);
      const Camera cam = synth_camera(spec, az, el);
      RenderSettings rs{spec.width, spec.height, spec.gt_spp, spec.shading_samples,
                        synth_view_seed(spec.seed, 1, t), spec.threads};
      const RenderResult r = render_image(scene, cam, rs);
      TestViewData tv;
      tv.exposure = auto_exposure({&r});
      tv.image = tone_map(r.image, tv.exposure);
      tv.mask = r.coverage;
      tv.camera = cam;
      tv.env = envs[e].image();
      tv.env_id = synth_environments()[e].id;
      tv.category = synth_environments()[e].category;
      tv.same_environment = e == 0;
      content.tests.push_back(std::move(tv));
      views.push_back({{"kind", "test"}, {"index", t}, {"env", e}, {"seed", rs.seed}, {"spp", rs.spp}});
    }
  }

  const Vec3 lo = bvh->bounds().lo, hi = bvh->bounds().hi;
  content.bounding_box = {lo.x(), lo.y(), lo.z(), hi.x(), hi.y(), hi.z()};
  write_object_dataset(out, content);
  write_ply(mesh, out / "mesh.ply");

  std::error_code ec;
  fs::create_directories(out / "truth", ec);
  if (ec) throw IoError("cannot create " + (out / "truth").string() + ": " + ec.message());
  nlohmann::json env_files = nlohmann::json::array();
  for (int e = 0; e < spec.n_envs; ++e) {
    const std::string name = "env_" + std::to_string(e) + ".hdr";
    write_rgbe(envs[e].image(), out / "truth" / name);
    env_files.push_back({{"file", name}, {"id", synth_environments()[e].id}});
  }
  write_assets(SceneAssets(bvh, truth, envs[0]), out / "truth",
               {{"environments", env_files},
                {"views", views},
                {"render", {{"width", spec.width}, {"height", spec.height}, {"shading_samples", spec.shading_samples}}}});
  return load_object_dataset(out);
}

}  // namespace relit
