#pragma once

// Inverse rendering: fits material textures and the environment map to input images
// by minimizing
//
//   L = sum_pixels |I - I_hat|  +  a1 TV(env)  +  a2 (TV(albedo) + TV(rough) + TV(metal))
//
// with analytic gradients through the frozen direct-illumination estimator (sample
// directions, MIS weights and visibility are held fixed; gradients flow through the BRDF
// and the environment texel lookups).

#include <relit/camera.hpp>
#include <relit/parallel.hpp>
#include <relit/render.hpp>

#include <functional>
#include <optional>
#include <vector>

namespace relit {

enum class LossNorm { kL1, kL2 };

struct OptimConfig {
  int iterations = 1200;
  double learning_rate = 0.02;
  /// Step size for the environment, which is optimized as log radiance.
  double env_learning_rate = 0.05;
  /// Final learning rate as a fraction of the initial one (exponential decay).
  double lr_decay = 0.1;
  int batch = 2048;
  int samples_per_point = 16;
  double alpha_env = 0.01;
  double alpha_material = 0.01;
  std::uint64_t seed = 0;
  int material_resolution = 64;
  /// Coarse-to-fine stages over equal shares of the iterations; each stage doubles the
  /// material and environment resolution, ending at the resolution of the given assets.
  int levels = 3;
  int env_width = 128;
  int env_height = 64;
  LossNorm norm = LossNorm::kL1;
  /// Two independent light-sample sets per ray (see frozen_loss_and_grad).
  bool decorrelate = true;
  int threads = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct GradientSet {
  Image<double, 3> d_albedo;
  ScalarImage d_roughness;
  ScalarImage d_metallic;
  Image<double, 3> d_env;

  static GradientSet zeros_like(const MaterialTextures& m, const EnvironmentMap& env) {
    return {Image<double, 3>(m.albedo.width(), m.albedo.height()),
            ScalarImage(m.roughness.width(), m.roughness.height()),
            ScalarImage(m.metallic.width(), m.metallic.height()), Image<double, 3>(env.width(), env.height())};
  }
};

struct TvResult {
  double value = 0;
  std::vector<double> gradient;  ///< same layout as the texture data
};

/// Anisotropic total variation with forward differences over all channels. The
/// horizontal difference wraps around when `wrap_u` is set. Subgradient 0 at ties.
template <typename T, int C>
TvResult total_variation(const Image<T, C>& tex, bool wrap_u = false) {
  require(tex.width() * tex.height() >= 2, "total variation needs at least two texels");
  TvResult out;
  out.gradient.assign(tex.data().size(), 0.0);
  const int w = tex.width(), h = tex.height();
  auto idx = [&](int x, int y, int c) { return (static_cast<std::size_t>(y) * w + x) * C + c; };
  auto add = [&](std::size_t a, std::size_t b) {
    const double d = tex.data()[b] - tex.data()[a];
    out.value += std::abs(d);
    const double s = d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
    out.gradient[b] += s;
    out.gradient[a] -= s;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < C; ++c) {
        if (x + 1 < w) add(idx(x, y, c), idx(x + 1, y, c));
        else if (wrap_u && w > 1) add(idx(x, y, c), idx(0, y, c));
        if (y + 1 < h) add(idx(x, y, c), idx(x, y + 1, c));
      }
    }
  }
  return out;
}

struct TrainingRay {
  Ray ray;
  Rgb target;  ///< linear radiance
  /// Another ray through the same pixel for the second estimate of a decorrelated loss.
  /// Without it both estimates share `ray`, and the pixel footprint then correlates them.
  std::optional<Ray> partner;
};

struct TrainingBatch {
  std::vector<TrainingRay> rays;
  /// Multiplies the per-ray residual sum (e.g. foreground pixels / batch size).
  double weight = 1.0;
};

/// Frozen estimator of one training ray. When the loss is decorrelated `second` holds an
/// independent sample set (empty if the partner ray missed).
struct FrozenRay {
  bool hit = false;
  ShadingPoint first;
  bool decorrelated = false;
  std::optional<ShadingPoint> second;
};

using FrozenBatch = std::vector<FrozenRay>;

inline FrozenBatch freeze_batch(const SceneAssets& assets, const TrainingBatch& batch, int samples_per_point,
                                std::uint64_t seed, bool decorrelate = true, int threads = 0) {
  require(!batch.rays.empty(), "training batch is empty");
  FrozenBatch frozen(batch.rays.size());
  parallel_chunks(batch.rays.size(), 64, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Ray& ray = batch.rays[i].ray;
      Rng rng = make_stream(seed, i);
      const auto hit = assets.geometry->intersect(ray);
      if (hit) {
        frozen[i].hit = true;
        frozen[i].first = prepare_shading(assets, *hit, -ray.dir, samples_per_point, rng);
      }
      if (!decorrelate) continue;
      frozen[i].decorrelated = true;
      const Ray& other = batch.rays[i].partner ? *batch.rays[i].partner : ray;
      const auto hit_b = batch.rays[i].partner ? assets.geometry->intersect(other) : hit;
      if (hit_b) frozen[i].second = prepare_shading(assets, *hit_b, -other.dir, samples_per_point, rng);
    }
  });
  return frozen;
}

namespace detail {

struct GradEntry {
  std::uint8_t cls;  // 0 albedo, 1 roughness, 2 metallic, 3 env
  std::uint8_t channel;
  int texel;
  double value;
};

struct SparseSink final : ShadingGradientSink {
  std::vector<GradEntry> entries;
  void albedo(int t, int c, double v) override { entries.push_back({0, static_cast<std::uint8_t>(c), t, v}); }
  void roughness(int t, double v) override { entries.push_back({1, 0, t, v}); }
  void metallic(int t, double v) override { entries.push_back({2, 0, t, v}); }
  void env(int t, int c, double v) override { entries.push_back({3, static_cast<std::uint8_t>(c), t, v}); }
};

}  // namespace detail

struct LossAndGradient {
  double value = 0;
  GradientSet gradient;
};

/// Data term and its gradient for a frozen batch. With one sample set per ray the loss is
/// sum |r| (L1) or sum r^2 (L2). With two independent sets A and B it is the surrogate
/// (sign(r_B) r_A + sign(r_A) r_B) / 2 or r_A r_B, whose gradients carry no correlation
/// between the residual and the sampled derivative; for L2 its expectation is the squared
/// error of the mean estimate.
inline LossAndGradient frozen_loss_and_grad(const MaterialTextures& materials, const EnvironmentMap& env,
                                            const TrainingBatch& batch, const FrozenBatch& frozen,
                                            LossNorm norm = LossNorm::kL1, int threads = 0) {
  require(!batch.rays.empty() && batch.rays.size() == frozen.size(), "frozen batch does not match rays");
  constexpr std::size_t kChunk = 64;
  const std::size_t n_chunks = (batch.rays.size() + kChunk - 1) / kChunk;
  std::vector<detail::SparseSink> sinks(n_chunks);
  std::vector<double> chunk_loss(n_chunks, 0.0);
  const bool l1 = norm == LossNorm::kL1;
  parallel_chunks(batch.rays.size(), kChunk, threads, [&](std::size_t begin, std::size_t end) {
    const std::size_t chunk = begin / kChunk;
    for (std::size_t i = begin; i < end; ++i) {
      const Rgb& target = batch.rays[i].target;
      const FrozenRay& f = frozen[i];
      if (!f.decorrelated) {
        if (!f.hit) {
          chunk_loss[chunk] += l1 ? target.abs().sum() : target.square().sum();
          continue;
        }
        const Rgb ra = shade(materials, env, f.first) - target;
        chunk_loss[chunk] += l1 ? ra.abs().sum() : ra.square().sum();
        const Rgb upstream = l1 ? Rgb(ra.sign()) : Rgb(2.0 * ra);
        shade(materials, env, f.first, upstream * batch.weight, &sinks[chunk]);
        continue;
      }
      const Rgb ra = (f.hit ? shade(materials, env, f.first) : Rgb(Rgb::Zero())) - target;
      const Rgb rb = (f.second ? shade(materials, env, *f.second) : Rgb(Rgb::Zero())) - target;
      const Rgb up_a = l1 ? Rgb(0.5 * rb.sign()) : rb;
      const Rgb up_b = l1 ? Rgb(0.5 * ra.sign()) : ra;
      chunk_loss[chunk] += l1 ? 0.5 * (rb.sign() * ra + ra.sign() * rb).sum() : (ra * rb).sum();
      if (f.hit) shade(materials, env, f.first, up_a * batch.weight, &sinks[chunk]);
      if (f.second) shade(materials, env, *f.second, up_b * batch.weight, &sinks[chunk]);
    }
  });
  LossAndGradient out{0.0, GradientSet::zeros_like(materials, env)};
  for (std::size_t c = 0; c < n_chunks; ++c) {
    out.value += chunk_loss[c];
    for (const auto& e : sinks[c].entries) {
      switch (e.cls) {
        case 0: out.gradient.d_albedo.data()[3 * e.texel + e.channel] += e.value; break;
        case 1: out.gradient.d_roughness.data()[e.texel] += e.value; break;
        case 2: out.gradient.d_metallic.data()[e.texel] += e.value; break;
        default: out.gradient.d_env.data()[3 * e.texel + e.channel] += e.value; break;
      }
    }
  }
  out.value *= batch.weight;
  return out;
}

/// Data term of the loss with freshly drawn (then frozen) light samples.
inline LossAndGradient data_loss_and_grad(const SceneAssets& assets, const TrainingBatch& batch,
                                          const OptimConfig& cfg, std::uint64_t sample_seed) {
  const auto frozen = freeze_batch(assets, batch, cfg.samples_per_point, sample_seed, cfg.decorrelate, cfg.threads);
  return frozen_loss_and_grad(assets.materials, assets.env, batch, frozen, cfg.norm, cfg.threads);
}

struct RegularizerTerms {
  double env = 0, albedo = 0, roughness = 0, metallic = 0;
};

/// Adds a1 TV(env) + a2 (TV(albedo) + TV(rough) + TV(metal)) to `grad`; returns the raw TV values.
inline RegularizerTerms add_regularizer(const MaterialTextures& m, const EnvironmentMap& env, double alpha_env,
                                        double alpha_material, GradientSet& grad) {
  RegularizerTerms terms;
  auto apply = [](const TvResult& tv, double alpha, std::span<double> g) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += alpha * tv.gradient[i];
    return tv.value;
  };
  terms.env = apply(total_variation(env.image(), true), alpha_env, grad.d_env.data());
  terms.albedo = apply(total_variation(m.albedo), alpha_material, grad.d_albedo.data());
  terms.roughness = apply(total_variation(m.roughness), alpha_material, grad.d_roughness.data());
  terms.metallic = apply(total_variation(m.metallic), alpha_material, grad.d_metallic.data());
  return terms;
}

/// Camera, linear target image and foreground mask of one input view.
struct TrainingView {
  Camera camera;
  LinearImage target;
  Mask mask;
};

struct OptimResult {
  SceneAssets assets;
  std::vector<double> loss_trace;  ///< total loss per iteration
};

/// Initial state: albedo 0.5, roughness 0.7, metallic 0.1, environment uniform at the
/// mean foreground target radiance.
inline SceneAssets initial_assets(std::shared_ptr<const Bvh> geometry, const std::vector<TrainingView>& views,
                                  const OptimConfig& cfg) {
  Rgb mean = Rgb::Zero();
  std::size_t n = 0;
  for (const auto& v : views)
    for (int y = 0; y < v.target.height(); ++y)
      for (int x = 0; x < v.target.width(); ++x)
        if (v.mask(x, y)) {
          mean += pixel(v.target, x, y);
          ++n;
        }
  require(n > 0, "training views have no foreground pixels");
  mean /= static_cast<double>(n);
  return SceneAssets(std::move(geometry),
                     MaterialTextures::uniform(cfg.material_resolution, Rgb::Constant(0.5), 0.7, 0.1),
                     EnvironmentMap::constant(cfg.env_width, cfg.env_height, mean.max(1e-6)));
}

namespace detail {

/// Square texture resampled by box averaging (smaller size) or texel replication (larger).
template <int C>
Image<double, C> resample_square(const Image<double, C>& t, int size) {
  const int w = t.width();
  if (size == w) return t;
  Image<double, C> out(size, size);
  if (size < w) {
    const int f = w / size;
    for (int y = 0; y < w; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < C; ++c) out.at(x / f, y / f, c) += t.at(x, y, c) / (f * f);
  } else {
    const int f = size / w;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        for (int c = 0; c < C; ++c) out.at(x, y, c) = t.at(x / f, y / f, c);
  }
  return out;
}

inline MaterialTextures resample_materials(const MaterialTextures& m, int size) {
  return {resample_square(m.albedo, size), resample_square(m.roughness, size), resample_square(m.metallic, size),
          m.model};
}

struct AdamState {
  std::vector<double> m, v;
  void step(std::span<double> theta, std::span<const double> g, double lr, const OptimConfig& cfg, int t) {
    if (m.empty()) {
      m.assign(theta.size(), 0.0);
      v.assign(theta.size(), 0.0);
    }
    const double c1 = 1.0 - std::pow(cfg.beta1, t), c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      theta[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.epsilon);
    }
  }
};

}  // namespace detail

/// Adam over all four parameter classes with projection after each step; the environment
/// is stepped in log space, which keeps it positive. The mesh stays fixed. `progress` (optional) is called with (iteration, loss).
inline OptimResult optimize(SceneAssets assets, const std::vector<TrainingView>& views, const OptimConfig& cfg,
                            const std::function<void(int, double)>& progress = {}) {
  require(cfg.iterations > 0 && cfg.learning_rate > 0 && cfg.env_learning_rate > 0 && cfg.batch > 0 && cfg.samples_per_point > 0,
          "optimizer settings must be positive");
  require(cfg.alpha_env >= 0 && cfg.alpha_material >= 0, "regularizer weights must be non-negative");

  struct Pixel {
    int view, x, y;
  };
  std::vector<Pixel> pixels;
  for (int v = 0; v < static_cast<int>(views.size()); ++v) {
    const auto& tv = views[v];
    require(tv.mask.same_shape(tv.target.width(), tv.target.height()), "training mask does not match its image");
    for (int y = 0; y < tv.target.height(); ++y)
      for (int x = 0; x < tv.target.width(); ++x)
        if (tv.mask(x, y)) pixels.push_back({v, x, y});
  }
  require(!pixels.empty(), "training views have no foreground pixels");

  // at least one foreground pixel center must hit the mesh
  bool any_hit = false;
  for (std::size_t i = 0; i < pixels.size() && !any_hit; i += std::max<std::size_t>(1, pixels.size() / 512)) {
    const auto& p = pixels[i];
    any_hit = assets.geometry->intersect(views[p.view].camera.pixel_ray(Vec2(p.x + 0.5, p.y + 0.5))).has_value();
  }
  require(any_hit, "dataset and mesh do not match: no input ray hits the mesh");

  detail::AdamState adam_albedo, adam_rough, adam_metal, adam_env;
  OptimResult result{assets, {}};
  result.loss_trace.reserve(cfg.iterations);
  const int full_material = assets.materials.albedo.width(), full_env = assets.env.height();
  int levels = std::max(1, cfg.levels);
  auto fits = [&](int n) {
    const int f = 1 << (n - 1);
    return full_material % f == 0 && full_material / f >= 2 && full_env % f == 0;
  };
  while (levels > 1 && !fits(levels)) --levels;
  // log radiance; a floor keeps black texels recoverable
  constexpr double kEnvFloor = 1e-4;
  std::vector<double> log_env, g_log;
  LinearImage env_values;
  auto enter_stage = [&](int level) {
    const int shift = levels - 1 - level;
    assets.materials = detail::resample_materials(assets.materials, full_material >> shift);
    const int env_h = full_env >> shift;
    if (assets.env.height() != env_h) assets.env = resize_env(assets.env, 2 * env_h, env_h);
    adam_albedo = adam_rough = adam_metal = adam_env = {};
    env_values = assets.env.image();
    log_env.clear();
    for (double v : env_values.data()) log_env.push_back(std::log(std::max(v, kEnvFloor)));
    g_log.assign(log_env.size(), 0.0);
  };

  int level = -1, stage_start = 0;
  for (int it = 0; it < cfg.iterations; ++it) {
    const int want = static_cast<int>(static_cast<long long>(it) * levels / cfg.iterations);
    if (want != level) {
      level = want;
      stage_start = it;
      enter_stage(level);
    }
    const int t = it - stage_start + 1;
    Rng rng = make_stream(cfg.seed, static_cast<std::uint64_t>(it));
    TrainingBatch batch;
    batch.weight = static_cast<double>(pixels.size()) / cfg.batch;
    batch.rays.reserve(cfg.batch);
    for (int b = 0; b < cfg.batch; ++b) {
      const auto& p = pixels[static_cast<std::size_t>(uniform01(rng) * pixels.size())];
      const auto& view = views[p.view];
      // targets average only the subpixel positions that hit, so draw positions the same way
      auto jittered = [&] {
        Ray ray = view.camera.pixel_ray(Vec2(p.x + uniform01(rng), p.y + uniform01(rng)));
        for (int k = 0; k < 8 && !assets.geometry->intersect(ray); ++k)
          ray = view.camera.pixel_ray(Vec2(p.x + uniform01(rng), p.y + uniform01(rng)));
        return ray;
      };
      const Ray a = jittered();
      batch.rays.push_back({a, pixel(view.target, p.x, p.y), jittered()});
    }
    const std::uint64_t sample_seed = splitmix64(cfg.seed ^ 0xa5a5a5a5ULL) + static_cast<std::uint64_t>(it);
    auto lg = data_loss_and_grad(assets, batch, cfg, sample_seed);
    const auto reg = add_regularizer(assets.materials, assets.env, cfg.alpha_env, cfg.alpha_material, lg.gradient);
    const double total = lg.value + cfg.alpha_env * reg.env +
                         cfg.alpha_material * (reg.albedo + reg.roughness + reg.metallic);
    result.loss_trace.push_back(total);
    if (progress) progress(it, total);

    const double lr = cfg.learning_rate * std::pow(cfg.lr_decay, static_cast<double>(it) / cfg.iterations);
    adam_albedo.step(assets.materials.albedo.data(), lg.gradient.d_albedo.data(), lr, cfg, t);
    adam_rough.step(assets.materials.roughness.data(), lg.gradient.d_roughness.data(), lr, cfg, t);
    adam_metal.step(assets.materials.metallic.data(), lg.gradient.d_metallic.data(), lr, cfg, t);
    const auto env_now = assets.env.image().data();
    for (std::size_t i = 0; i < g_log.size(); ++i) g_log[i] = lg.gradient.d_env.data()[i] * env_now[i];
    adam_env.step(log_env, g_log, lr * cfg.env_learning_rate / cfg.learning_rate, cfg, t);
    assets.materials.clamp_ranges();
    for (std::size_t i = 0; i < log_env.size(); ++i) env_values.data()[i] = std::exp(log_env[i]);
    assets.env = EnvironmentMap(env_values);
  }
  result.assets = std::move(assets);
  return result;
}

/// Renders fitted assets under a different environment; the assets are not modified.
inline RenderResult relight(const SceneAssets& assets, const EnvironmentMap& new_env, const Camera& cam,
                            const RenderSettings& settings) {
  SceneAssets lit(assets.geometry, assets.materials, new_env);
  return render_image(lit, cam, settings);
}

}  // namespace relit
