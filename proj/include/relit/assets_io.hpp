#pragma once

// Fitted or ground-truth assets on disk: albedo.hdr, roughness.hdr, metallic.hdr,
// env.hdr, mesh.ply and manifest.json. Scalar textures are stored as gray RGB.

#include <relit/dataset.hpp>
#include <relit/mesh.hpp>
#include <relit/render.hpp>

#include <nlohmann/json.hpp>

namespace relit {

inline LinearImage scalar_to_rgb(const ScalarImage& s) {
  LinearImage out(s.width(), s.height());
  for (int y = 0; y < s.height(); ++y)
    for (int x = 0; x < s.width(); ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = s.at(x, y, 0);
  return out;
}

inline ScalarImage rgb_to_scalar(const LinearImage& img) {
  ScalarImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out.at(x, y, 0) = img.at(x, y, 0);
  return out;
}

/// Rounds every value to what an RGBE file stores, so written assets reload exactly.
inline LinearImage quantize_rgbe(const LinearImage& img) {
  LinearImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) {
      const Rgb p = pixel(img, x, y);
      set_pixel(out, x, y, decode_rgbe(encode_rgbe(p[0], p[1], p[2])));
    }
  return out;
}

inline ScalarImage quantize_rgbe(const ScalarImage& img) { return rgb_to_scalar(quantize_rgbe(scalar_to_rgb(img))); }

inline void write_assets(const SceneAssets& assets, const fs::path& dir, const nlohmann::json& extra = {}) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_rgbe(assets.materials.albedo, dir / "albedo.hdr");
  write_rgbe(scalar_to_rgb(assets.materials.roughness), dir / "roughness.hdr");
  write_rgbe(scalar_to_rgb(assets.materials.metallic), dir / "metallic.hdr");
  write_rgbe(assets.env.image(), dir / "env.hdr");
  write_ply(assets.geometry->mesh(), dir / "mesh.ply");
  nlohmann::json manifest = {{"albedo", "albedo.hdr"},
                             {"roughness", "roughness.hdr"},
                             {"metallic", "metallic.hdr"},
                             {"env", "env.hdr"},
                             {"mesh", "mesh.ply"},
                             {"brdf", assets.materials.model == BrdfModel::kLambertian ? "lambertian" : "principled"}};
  if (extra.is_object()) manifest.update(extra);
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

inline SceneAssets read_assets(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::is_regular_file(manifest_path)) throw IoError("missing file: " + manifest_path.string());
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_text_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(manifest_path.string() + ": " + e.what());
  }
  auto file = [&](const char* key) {
    if (!m.contains(key) || !m[key].is_string()) throw ValidationError("manifest.json lacks '" + std::string(key) + "'");
    return dir / m[key].get<std::string>();
  };
  MaterialTextures mats{read_rgbe(file("albedo")), rgb_to_scalar(read_rgbe(file("roughness"))),
                        rgb_to_scalar(read_rgbe(file("metallic"))),
                        m.value("brdf", "principled") == "lambertian" ? BrdfModel::kLambertian
                                                                      : BrdfModel::kPrincipled};
  mats.clamp_ranges();
  return SceneAssets(read_ply(file("mesh")), std::move(mats), EnvironmentMap(read_rgbe(file("env"))));
}

}  // namespace relit
