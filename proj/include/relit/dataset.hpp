#pragma once

// Object directory layout:
//
//   <root>/test/gt_image_xxxx.png, gt_camera_xxxx.txt, gt_exposure_xxxx.txt,
//               gt_env_512_rotated_xxxx.hdr, gt_mask_xxxx.png (optional), environments.txt (optional)
//   <root>/test/inputs/image_xxxx.png, camera_xxxx.txt, mask_xxxx.png,
//                      exposure.txt, object_bounding_box.txt
//   <root>/mesh.ply (optional)

#include <relit/camera.hpp>
#include <relit/png_io.hpp>
#include <relit/rgbe.hpp>

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace relit {

namespace fs = std::filesystem;

struct InputView {
  int index = 0;
  fs::path image, mask;
  Camera camera;
};

struct TestView {
  int index = 0;
  fs::path image, env;
  std::optional<fs::path> mask;
  Camera camera;
  double exposure = 0;
  std::string env_id;
  std::string category;
  bool same_environment = false;
};

struct ObjectDataset {
  fs::path root;
  std::string name;
  std::vector<InputView> inputs;
  double input_exposure = 0;
  std::array<double, 6> bounding_box{};
  std::vector<TestView> tests;
  std::optional<fs::path> mesh;
};

inline std::string view_suffix(int index) {
  require(index >= 0 && index <= 9999, "view index must fit in four digits");
  char buf[8];
  std::snprintf(buf, sizeof buf, "%04d", index);
  return buf;
}

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

/// Whitespace-separated numbers, skipping '#' comment lines.
inline std::vector<double> parse_numbers(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream tokens(line);
    std::string tok;
    while (tokens >> tok) {
      std::size_t used = 0;
      double v;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        throw ValidationError(what + ": not a number: '" + tok + "'");
      }
      if (used != tok.size() || !std::isfinite(v)) throw ValidationError(what + ": not a number: '" + tok + "'");
      out.push_back(v);
    }
  }
  return out;
}

inline double read_scalar_file(const fs::path& path) {
  const auto v = parse_numbers(read_text_file(path), path.string());
  if (v.size() != 1) throw ValidationError(path.string() + ": expected exactly one number");
  return v[0];
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

/// Indices of files named <prefix>dddd<suffix> in `dir`.
inline std::set<int> scan_indices(const fs::path& dir, const std::string& prefix, const std::string& suffix) {
  std::set<int> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() != prefix.size() + 4 + suffix.size()) continue;
    if (name.compare(0, prefix.size(), prefix) != 0) continue;
    if (name.compare(prefix.size() + 4, suffix.size(), suffix) != 0) continue;
    const std::string digits = name.substr(prefix.size(), 4);
    if (digits.find_first_not_of("0123456789") != std::string::npos) continue;
    out.insert(std::stoi(digits));
  }
  return out;
}

inline void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw ValidationError("missing file: " + p.string());
}

/// Every index present in any group must be present in all of them.
inline std::vector<int> matched_indices(const fs::path& dir,
                                        const std::vector<std::pair<std::string, std::string>>& groups) {
  std::set<int> all;
  for (const auto& [prefix, suffix] : groups) all.merge(scan_indices(dir, prefix, suffix));
  for (int i : all)
    for (const auto& [prefix, suffix] : groups) require_file(dir / (prefix + view_suffix(i) + suffix));
  return {all.begin(), all.end()};
}

inline Camera load_camera(const fs::path& p) {
  try {
    return parse_camera(read_text_file(p));
  } catch (const ValidationError& e) {
    throw ValidationError(p.string() + ": " + e.what());
  }
}

}  // namespace detail

inline ObjectDataset load_object_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("not a directory: " + root.string());
  ObjectDataset d;
  d.root = root;
  d.name = fs::absolute(root).lexically_normal().filename().string();
  if (d.name.empty()) d.name = fs::absolute(root).lexically_normal().parent_path().filename().string();

  const fs::path test = root / "test";
  const fs::path inputs = test / "inputs";
  detail::require_file(inputs / "exposure.txt");
  detail::require_file(inputs / "object_bounding_box.txt");
  d.input_exposure = read_scalar_file(inputs / "exposure.txt");
  const auto box = parse_numbers(read_text_file(inputs / "object_bounding_box.txt"), "object_bounding_box.txt");
  if (box.size() != 6) throw ValidationError("object_bounding_box.txt: expected 6 numbers");
  for (int i = 0; i < 6; ++i) d.bounding_box[i] = box[i];
  for (int i = 0; i < 3; ++i)
    if (d.bounding_box[i] > d.bounding_box[i + 3]) throw ValidationError("bounding box min exceeds max");

  const auto input_ids = detail::matched_indices(inputs, {{"image_", ".png"}, {"camera_", ".txt"}, {"mask_", ".png"}});
  if (input_ids.empty()) throw ValidationError("missing file: " + (inputs / "image_0000.png").string());
  for (int i : input_ids) {
    const std::string s = view_suffix(i);
    d.inputs.push_back({i, inputs / ("image_" + s + ".png"), inputs / ("mask_" + s + ".png"),
                        detail::load_camera(inputs / ("camera_" + s + ".txt"))});
  }

  const auto test_ids = detail::matched_indices(test, {{"gt_image_", ".png"},
                                                       {"gt_camera_", ".txt"},
                                                       {"gt_exposure_", ".txt"},
                                                       {"gt_env_512_rotated_", ".hdr"}});
  if (test_ids.empty()) throw ValidationError("missing file: " + (test / "gt_image_0000.png").string());

  std::map<int, std::array<std::string, 3>> env_info;
  if (fs::is_regular_file(test / "environments.txt")) {
    std::istringstream lines(read_text_file(test / "environments.txt"));
    std::string line;
    while (std::getline(lines, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream tok(line);
      std::string idx, id, cat, same;
      if (!(tok >> idx >> id >> cat >> same) || (same != "same" && same != "new"))
        throw ValidationError("environments.txt: malformed line '" + line + "'");
      env_info[std::stoi(idx)] = {id, cat, same};
    }
  }

  for (int i : test_ids) {
    const std::string s = view_suffix(i);
    TestView t;
    t.index = i;
    t.image = test / ("gt_image_" + s + ".png");
    t.env = test / ("gt_env_512_rotated_" + s + ".hdr");
    t.camera = detail::load_camera(test / ("gt_camera_" + s + ".txt"));
    t.exposure = read_scalar_file(test / ("gt_exposure_" + s + ".txt"));
    if (fs::is_regular_file(test / ("gt_mask_" + s + ".png"))) t.mask = test / ("gt_mask_" + s + ".png");
    if (auto it = env_info.find(i); it != env_info.end()) {
      t.env_id = it->second[0];
      t.category = it->second[1];
      t.same_environment = it->second[2] == "same";
    } else {
      t.env_id = "env";
      t.category = "unknown";
    }
    d.tests.push_back(std::move(t));
  }
  if (fs::is_regular_file(root / "mesh.ply")) d.mesh = root / "mesh.ply";
  return d;
}

/// In-memory content of an object directory.
struct InputViewData {
  TonemappedImage image;
  Mask mask;
  Camera camera;
};

struct TestViewData {
  TonemappedImage image;
  Mask mask;
  Camera camera;
  double exposure = 0;
  LinearImage env;
  std::string env_id = "env";
  std::string category = "unknown";
  bool same_environment = false;
};

struct DatasetContent {
  std::vector<InputViewData> inputs;
  double input_exposure = 0;
  std::array<double, 6> bounding_box{};
  std::vector<TestViewData> tests;
};

/// Writes `content` with view indices 0000, 0001, ... Returns the loaded dataset.
inline ObjectDataset write_object_dataset(const fs::path& root, const DatasetContent& content) {
  const fs::path test = root / "test";
  const fs::path inputs = test / "inputs";
  std::error_code ec;
  fs::create_directories(inputs, ec);
  if (ec) throw IoError("cannot create " + inputs.string() + ": " + ec.message());

  write_text_file(inputs / "exposure.txt", format_double(content.input_exposure) + "\n");
  std::string box;
  for (int i = 0; i < 6; ++i) box += format_double(content.bounding_box[i]) + (i == 5 ? "\n" : " ");
  write_text_file(inputs / "object_bounding_box.txt", box);
  for (std::size_t i = 0; i < content.inputs.size(); ++i) {
    const auto& v = content.inputs[i];
    const std::string s = view_suffix(static_cast<int>(i));
    write_png_rgb(v.image, inputs / ("image_" + s + ".png"));
    write_mask_png(v.mask, inputs / ("mask_" + s + ".png"));
    write_text_file(inputs / ("camera_" + s + ".txt"), serialize_camera(v.camera));
  }
  std::string env_lines;
  for (std::size_t i = 0; i < content.tests.size(); ++i) {
    const auto& t = content.tests[i];
    const std::string s = view_suffix(static_cast<int>(i));
    write_png_rgb(t.image, test / ("gt_image_" + s + ".png"));
    write_mask_png(t.mask, test / ("gt_mask_" + s + ".png"));
    write_text_file(test / ("gt_camera_" + s + ".txt"), serialize_camera(t.camera));
    write_text_file(test / ("gt_exposure_" + s + ".txt"), format_double(t.exposure) + "\n");
    write_rgbe(t.env, test / ("gt_env_512_rotated_" + s + ".hdr"));
    env_lines += s + " " + t.env_id + " " + t.category + " " + (t.same_environment ? "same" : "new") + "\n";
  }
  write_text_file(test / "environments.txt", env_lines);
  return load_object_dataset(root);
}

}  // namespace relit
