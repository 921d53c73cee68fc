#include <relit/evaluate.hpp>
#include <relit/pipeline.hpp>
#include <relit/synth.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <iostream>
#include <sstream>

namespace {

using namespace relit;

struct Globals {
  std::uint64_t seed = 1;
  int threads = 0;
  bool verbose = false;
};

void log(const Globals& g, const std::string& msg) {
  if (g.verbose) std::cerr << msg << "\n";
}

// CSV of N x 3 patch means; a non-numeric first line is taken as a header
std::vector<Rgb> read_patches(const fs::path& path) {
  std::istringstream lines(read_text_file(path));
  std::string line;
  std::vector<Rgb> out;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    std::replace(line.begin(), line.end(), ',', ' ');
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line_no == 1 && std::isalpha(static_cast<unsigned char>(line[first]))) continue;
    const auto v = parse_numbers(line, path.string() + " line " + std::to_string(line_no));
    if (v.size() != 3) throw ValidationError(path.string() + " line " + std::to_string(line_no) + ": expected 3 values");
    out.emplace_back(v[0], v[1], v[2]);
  }
  return out;
}

LinearImage read_bracket_image(const fs::path& path) {
  return path.extension() == ".hdr" ? read_rgbe(path) : inverse_tone_map(read_png_rgb(path), 0.0);
}

// lines of "<image> <shutter seconds>", paths relative to the manifest
std::vector<BracketFrame> read_manifest(const fs::path& path) {
  std::istringstream lines(read_text_file(path));
  std::string line;
  std::vector<BracketFrame> out;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    std::istringstream tokens(line);
    std::string image, shutter, extra;
    if (!(tokens >> image) || image[0] == '#') continue;
    const std::string where = path.string() + " line " + std::to_string(line_no);
    if (!(tokens >> shutter) || (tokens >> extra)) throw ValidationError(where + ": expected '<image> <shutter seconds>'");
    const auto t = parse_numbers(shutter, where);
    fs::path p = image;
    if (p.is_relative()) p = path.parent_path() / p;
    out.push_back({read_bracket_image(p), t[0]});
  }
  return out;
}

BracketFrame read_frame(const std::string& spec) {
  const auto colon = spec.rfind(':');
  if (colon == std::string::npos) throw ValidationError("frame '" + spec + "' must be <image>:<shutter seconds>");
  const fs::path path = spec.substr(0, colon);
  const auto t = parse_numbers(spec.substr(colon + 1), "shutter time");
  if (t.size() != 1) throw ValidationError("frame '" + spec + "': bad shutter time");
  return {read_bracket_image(path), t[0]};
}

int run(int argc, char** argv) {
  CLI::App app{"Relighting benchmark toolkit: synthetic datasets, inverse rendering, relighting and scoring"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_flag("--verbose", g.verbose, "progress output on stderr");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic object directory");
  SynthSpec sspec;
  std::string shape = "composite";
  fs::path synth_out;
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--shape", shape, "sphere | box | capsule | composite")->capture_default_str();
  synth_cmd->add_option("--resolution", sspec.resolution, "tessellation segments")->capture_default_str();
  synth_cmd->add_option("--texture-size", sspec.texture_size, "material texture resolution")->capture_default_str();
  synth_cmd->add_option("--env-width", sspec.env_width, "environment map width")->capture_default_str();
  synth_cmd->add_option("--envs", sspec.n_envs, "number of environments (2 or 3)")->capture_default_str();
  synth_cmd->add_option("--views", sspec.n_inputs, "input views")->capture_default_str();
  synth_cmd->add_option("--tests-per-env", sspec.tests_per_env, "test views per environment")->capture_default_str();
  synth_cmd->add_option("--width", sspec.width, "image width")->capture_default_str();
  synth_cmd->add_option("--height", sspec.height, "image height")->capture_default_str();
  synth_cmd->add_option("--spp", sspec.input_spp, "samples per pixel for inputs")->capture_default_str();
  synth_cmd->add_option("--gt-spp", sspec.gt_spp, "samples per pixel for test images")->capture_default_str();
  synth_cmd->add_option("--shading-samples", sspec.shading_samples, "light samples per strategy")->capture_default_str();

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "fit material textures and environment to a dataset's inputs");
  OptimConfig cfg;
  fs::path fit_dataset_dir, fit_mesh, fit_out;
  std::string loss = "l1";
  int env_out_height = 0;
  fit_cmd->add_option("--dataset", fit_dataset_dir, "object directory")->required();
  fit_cmd->add_option("--mesh", fit_mesh, "PLY mesh (default <dataset>/mesh.ply)");
  fit_cmd->add_option("--out", fit_out, "output assets directory")->required();
  fit_cmd->add_option("--iters", cfg.iterations, "optimizer iterations")->capture_default_str();
  fit_cmd->add_option("--lr", cfg.learning_rate, "initial learning rate")->capture_default_str();
  fit_cmd->add_option("--env-lr", cfg.env_learning_rate, "learning rate of the log environment")->capture_default_str();
  fit_cmd->add_option("--lr-decay", cfg.lr_decay, "final / initial learning rate")->capture_default_str();
  fit_cmd->add_option("--spp", cfg.samples_per_point, "light samples per strategy and shading point")->capture_default_str();
  fit_cmd->add_option("--batch", cfg.batch, "rays per step")->capture_default_str();
  fit_cmd->add_option("--alpha-env", cfg.alpha_env, "TV weight on the environment")->capture_default_str();
  fit_cmd->add_option("--alpha-material", cfg.alpha_material, "TV weight on the material textures")->capture_default_str();
  fit_cmd->add_option("--texture-size", cfg.material_resolution, "material texture resolution")->capture_default_str();
  fit_cmd->add_option("--env-width", cfg.env_width, "environment width while fitting")->capture_default_str();
  fit_cmd->add_option("--levels", cfg.levels, "coarse-to-fine stages")->check(CLI::PositiveNumber)->capture_default_str();
  fit_cmd->add_option("--env-out-height", env_out_height, "resample the fitted environment to this height");
  fit_cmd->add_flag("!--shared-samples", cfg.decorrelate, "use one light-sample set per ray for residual and gradient");
  fit_cmd->add_option("--loss", loss, "l1 | l2")->check(CLI::IsMember({"l1", "l2"}))->capture_default_str();

  // relight
  auto* relight_cmd = app.add_subcommand("relight", "render fitted assets under each test view's environment");
  fs::path rl_assets, rl_dataset, rl_out, rl_env, rl_camera;
  std::string rl_rotate;
  RenderSettings rs;
  rs.spp = 256;
  rs.shading_samples = 4;
  relight_cmd->add_option("--assets", rl_assets, "fitted assets directory")->required();
  relight_cmd->add_option("--dataset", rl_dataset, "object directory (renders all test views)");
  relight_cmd->add_option("--env", rl_env, "single render: environment HDR");
  relight_cmd->add_option("--camera", rl_camera, "single render: camera file");
  relight_cmd->add_option("--rotate", rl_rotate, "single render: rotate the environment by 9 row-major floats");
  relight_cmd->add_option("--width", rs.width, "single render: width")->capture_default_str();
  relight_cmd->add_option("--height", rs.height, "single render: height")->capture_default_str();
  relight_cmd->add_option("--out", rl_out, "output directory, or HDR file for a single render")->required();
  relight_cmd->add_option("--spp", rs.spp, "samples per pixel")->capture_default_str();
  relight_cmd->add_option("--shading-samples", rs.shading_samples, "light samples per strategy")->capture_default_str();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "score renders against a dataset's test images");
  fs::path ev_dataset, ev_renders, ev_csv, ev_json;
  std::optional<fs::path> ev_perceptual;
  eval_cmd->add_option("--dataset", ev_dataset, "object directory")->required();
  eval_cmd->add_option("--renders", ev_renders, "directory of render_xxxx.hdr")->required();
  eval_cmd->add_option("--perceptual", ev_perceptual, "directory of lpips_xxxx.hdr distance maps");
  eval_cmd->add_option("--csv", ev_csv, "per-view CSV output")->required();
  eval_cmd->add_option("--json", ev_json, "JSON output with aggregates");

  // merge-hdr
  auto* merge_cmd = app.add_subcommand("merge-hdr", "merge an exposure bracket into linear radiance");
  std::vector<std::string> frames;
  double threshold = 0.98;
  fs::path merge_manifest, merge_out, merge_mask;
  merge_cmd->add_option("--manifest", merge_manifest, "text file of '<image> <shutter seconds>' lines");
  merge_cmd->add_option("--frame", frames, "<image.png|image.hdr>:<shutter seconds>, repeated");
  merge_cmd->add_option("--saturation", threshold, "saturation threshold in [0,1]")->capture_default_str();
  merge_cmd->add_option("--out", merge_out, "output HDR")->required();
  merge_cmd->add_option("--saturated-mask", merge_mask, "PNG of pixels saturated in every frame");

  // calibrate-color
  auto* color_cmd = app.add_subcommand("calibrate-color", "fit a 3x3 color transform between patch sets");
  fs::path col_src, col_dst, col_apply, col_out, col_json;
  color_cmd->add_option("--src", col_src, "CSV of source patch means (N x 3)")->required();
  color_cmd->add_option("--dst", col_dst, "CSV of target patch means (N x 3)")->required();
  color_cmd->add_option("--json", col_json, "write matrix and residual as JSON");
  color_cmd->add_option("--apply", col_apply, "HDR image to transform");
  color_cmd->add_option("--out", col_out, "transformed HDR output");

  // report
  auto* report_cmd = app.add_subcommand("report", "compare methods and correlate relighting with novel-view rankings");
  std::vector<std::string> names;
  std::vector<fs::path> rel_csvs, nvs_csvs;
  fs::path report_out;
  report_cmd->add_option("--names", names, "method names")->required();
  report_cmd->add_option("--relight", rel_csvs, "relighting CSV per method")->required();
  report_cmd->add_option("--nvs", nvs_csvs, "novel-view CSV per method")->required();
  report_cmd->add_option("--out", report_out, "write the table here instead of stdout");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (g.threads > 0) cfg.threads = rs.threads = sspec.threads = g.threads;

  if (synth_cmd->parsed()) {
    sspec.shape = parse_shape(shape);
    sspec.seed = g.seed;
    const auto d = synth(sspec, synth_out);
    std::cout << "wrote " << d.inputs.size() << " input views and " << d.tests.size() << " test views to "
              << synth_out.string() << "\n";
  } else if (fit_cmd->parsed()) {
    const ObjectDataset d = load_object_dataset(fit_dataset_dir);
    if (fit_mesh.empty()) {
      if (!d.mesh) throw ValidationError("no --mesh given and " + (fit_dataset_dir / "mesh.ply").string() + " is missing");
      fit_mesh = *d.mesh;
    }
    cfg.seed = g.seed;
    cfg.norm = loss == "l2" ? LossNorm::kL2 : LossNorm::kL1;
    cfg.env_height = cfg.env_width / 2;
    auto result = fit_dataset(d, read_ply(fit_mesh), cfg, [&](int it, double l) {
      if (it % 50 == 0) log(g, "iter " + std::to_string(it) + " loss " + format_double(l));
    });
    if (env_out_height > 0)
      result.assets.env = resize_env(result.assets.env, 2 * env_out_height, env_out_height);
    write_assets(result.assets, fit_out);
    std::string trace = "iteration,loss\n";
    for (std::size_t i = 0; i < result.loss_trace.size(); ++i)
      trace += std::to_string(i) + "," + format_double(result.loss_trace[i]) + "\n";
    write_text_file(fit_out / "loss_trace.csv", trace);
    std::cout << "final loss " << format_double(result.loss_trace.back()) << "\n";
  } else if (relight_cmd->parsed()) {
    const SceneAssets assets = read_assets(rl_assets);
    rs.seed = g.seed;
    if (!rl_dataset.empty()) {
      const ObjectDataset d = load_object_dataset(rl_dataset);
      relight_dataset(assets, d, rl_out, rs);
      std::cout << "rendered " << d.tests.size() << " test views to " << rl_out.string() << "\n";
    } else {
      if (rl_env.empty() || rl_camera.empty()) throw ValidationError("relight needs --dataset, or --env and --camera");
      const Camera cam = detail::load_camera(rl_camera);
      EnvironmentMap env(read_rgbe(rl_env));
      if (!rl_rotate.empty()) {
        const auto v = parse_numbers(rl_rotate, "--rotate");
        if (v.size() != 9) throw ValidationError("--rotate expects 9 numbers, got " + std::to_string(v.size()));
        Mat3 rot;
        for (int i = 0; i < 9; ++i) rot(i / 3, i % 3) = v[i];
        env = rotate_env(env, rot);
      }
      const RenderResult r = relight(assets, env, cam, rs);
      write_rgbe(r.image, rl_out);
    }
  } else if (eval_cmd->parsed()) {
    const ObjectDataset d = load_object_dataset(ev_dataset);
    const MetricsReport rep = evaluate(d, ev_renders, ev_perceptual, g.threads);
    write_text_file(ev_csv, report_csv(rep));
    if (!ev_json.empty()) write_text_file(ev_json, report_json(rep).dump(2) + "\n");
    std::cout << "overall psnr_db " << format_metric(rep.overall.psnr_db) << " ssim "
              << format_metric(rep.overall.ssim) << "\n";
  } else if (merge_cmd->parsed()) {
    std::vector<BracketFrame> bracket;
    if (!merge_manifest.empty()) bracket = read_manifest(merge_manifest);
    for (const auto& f : frames) bracket.push_back(read_frame(f));
    if (bracket.empty()) throw ValidationError("merge-hdr needs --manifest or --frame");
    const MergeResult m = merge_brackets(bracket, threshold);
    write_rgbe(m.radiance, merge_out);
    if (!merge_mask.empty()) write_mask_png(m.saturated, merge_mask);
    std::cout << "saturated pixels " << m.saturated.count() << "\n";
  } else if (color_cmd->parsed()) {
    const ColorTransform t = fit_color_transform(read_patches(col_src), read_patches(col_dst));
    std::cout << t.matrix << "\nresidual_rms " << format_double(t.residual_rms) << "\n";
    if (!col_json.empty()) {
      nlohmann::json j = {{"matrix", nlohmann::json::array()}, {"residual_rms", t.residual_rms}};
      for (int r = 0; r < 3; ++r) j["matrix"].push_back({t.matrix(r, 0), t.matrix(r, 1), t.matrix(r, 2)});
      write_text_file(col_json, j.dump(2) + "\n");
    }
    if (!col_apply.empty()) {
      if (col_out.empty()) throw ValidationError("--apply needs --out");
      write_rgbe(t.apply(read_rgbe(col_apply)), col_out);
    }
  } else if (report_cmd->parsed()) {
    const std::string table = comparison_table(compare_methods(names, rel_csvs, nvs_csvs));
    if (report_out.empty()) std::cout << table;
    else write_text_file(report_out, table);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const relit::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const relit::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
