#pragma once

// Dataset-level steps shared by the command-line tool and the closed-loop test.

#include <relit/assets_io.hpp>
#include <relit/dataset.hpp>
#include <relit/optimize.hpp>
#include <relit/photometry.hpp>

namespace relit {

/// Input views linearized with the dataset's input exposure.
inline std::vector<TrainingView> load_training_views(const ObjectDataset& d) {
  std::vector<TrainingView> views;
  for (const auto& in : d.inputs) {
    const TonemappedImage img = read_png_rgb(in.image);
    Mask mask = read_mask_png(in.mask);
    require(mask.same_shape(img.width(), img.height()), in.mask.string() + ": size does not match its image");
    views.push_back({in.camera, inverse_tone_map(img, d.input_exposure), std::move(mask)});
  }
  return views;
}

inline OptimResult fit_dataset(const ObjectDataset& d, const Mesh& mesh, const OptimConfig& cfg,
                               const std::function<void(int, double)>& progress = {}) {
  const auto views = load_training_views(d);
  auto bvh = std::make_shared<const Bvh>(mesh);
  return optimize(initial_assets(bvh, views, cfg), views, cfg, progress);
}

/// Renders every test view of `d` under its ground-truth environment into
/// out_dir/render_xxxx.hdr, at the size of the ground-truth image.
inline void relight_dataset(const SceneAssets& assets, const ObjectDataset& d, const fs::path& out_dir,
                            RenderSettings settings) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  const std::uint64_t base_seed = settings.seed;
  for (const auto& t : d.tests) {
    const TonemappedImage gt = read_png_rgb(t.image);
    settings.width = gt.width();
    settings.height = gt.height();
    settings.seed = splitmix64(base_seed) + static_cast<std::uint64_t>(t.index);
    const EnvironmentMap env(read_rgbe(t.env));
    const RenderResult r = relight(assets, env, t.camera, settings);
    write_rgbe(r.image, out_dir / ("render_" + view_suffix(t.index) + ".hdr"));
  }
}

}  // namespace relit
