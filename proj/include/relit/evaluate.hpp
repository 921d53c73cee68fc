#pragma once

// Scoring of submitted linear renders against the 8-bit ground truth of a dataset, and
// comparison of several methods' score files.

#include <relit/dataset.hpp>
#include <relit/metrics.hpp>
#include <relit/parallel.hpp>
#include <relit/photometry.hpp>

#include <nlohmann/json.hpp>

#include <functional>
#include <limits>
#include <set>
#include <tuple>
#include <map>

namespace relit {

struct ViewScore {
  std::string object;
  std::string env;
  std::string category;
  bool same_environment = false;
  int view = 0;
  double psnr_db = 0;
  double ssim = 0;
  double perceptual = std::numeric_limits<double>::quiet_NaN();
  Rgb ev = Rgb::Zero();
};

struct ScoreAggregate {
  std::size_t count = 0;
  double psnr_db = 0;
  double ssim = 0;
  double perceptual = std::numeric_limits<double>::quiet_NaN();
};

struct MetricsReport {
  std::vector<ViewScore> views;
  std::map<std::string, ScoreAggregate> by_category;
  ScoreAggregate same_environment;
  ScoreAggregate new_environment;
  ScoreAggregate overall;
};

/// Means over rows; perceptual only when every row has a value.
inline ScoreAggregate aggregate_scores(const std::vector<const ViewScore*>& rows) {
  ScoreAggregate a;
  a.count = rows.size();
  if (rows.empty()) {
    a.psnr_db = a.ssim = std::numeric_limits<double>::quiet_NaN();
    return a;
  }
  double p = 0;
  bool have_p = true;
  for (const auto* r : rows) {
    a.psnr_db += r->psnr_db;
    a.ssim += r->ssim;
    have_p = have_p && !std::isnan(r->perceptual);
    p += r->perceptual;
  }
  a.psnr_db /= static_cast<double>(rows.size());
  a.ssim /= static_cast<double>(rows.size());
  if (have_p) a.perceptual = p / static_cast<double>(rows.size());
  return a;
}

inline void fill_aggregates(MetricsReport& rep) {
  std::map<std::string, std::vector<const ViewScore*>> cat;
  std::vector<const ViewScore*> same, fresh, all;
  for (const auto& v : rep.views) {
    cat[v.category].push_back(&v);
    (v.same_environment ? same : fresh).push_back(&v);
    all.push_back(&v);
  }
  rep.by_category.clear();
  for (const auto& [k, rows] : cat) rep.by_category[k] = aggregate_scores(rows);
  rep.same_environment = aggregate_scores(same);
  rep.new_environment = aggregate_scores(fresh);
  rep.overall = aggregate_scores(all);
}

/// Scores one render: per-channel exposure solve, tone map, background zeroed by the mask.
inline ViewScore score_view(const LinearImage& render, const TonemappedImage& gt, const Mask& mask,
                            const ScalarImage* distance = nullptr) {
  require(render.width() == gt.width() && render.height() == gt.height(), "render size does not match the ground truth");
  require(mask.count() > 0, "ground-truth mask is empty");
  check_linear(render, "render");
  ViewScore s;
  s.ev = solve_exposure(render, gt, mask).ev;
  const TonemappedImage mapped = apply_mask_zero(tone_map(render, s.ev), mask);
  const TonemappedImage ref = apply_mask_zero(gt, mask);
  s.psnr_db = masked_psnr(mapped, ref, mask);
  s.ssim = masked_ssim(mapped, ref, mask);
  if (distance) s.perceptual = masked_perceptual(*distance, mask);
  return s;
}

/// Mask of a test view: gt_mask_xxxx.png, or the non-black pixels of the ground truth.
inline Mask test_view_mask(const TestView& t, const TonemappedImage& gt) {
  if (t.mask) {
    Mask m = read_mask_png(*t.mask);
    require(m.same_shape(gt.width(), gt.height()), t.mask->string() + ": size does not match the ground truth");
    return m;
  }
  Mask m(gt.width(), gt.height());
  for (int y = 0; y < gt.height(); ++y)
    for (int x = 0; x < gt.width(); ++x)
      m.set(x, y, gt.at(x, y, 0) || gt.at(x, y, 1) || gt.at(x, y, 2));
  return m;
}

/// Scores renders_dir/render_xxxx.hdr for every test view. Perceptual scores come from
/// perceptual_dir/lpips_xxxx.hdr (first channel) when a directory is given.
inline MetricsReport evaluate(const ObjectDataset& d, const fs::path& renders_dir,
                              const std::optional<fs::path>& perceptual_dir = std::nullopt, int threads = 0) {
  for (const auto& t : d.tests) {
    const fs::path p = renders_dir / ("render_" + view_suffix(t.index) + ".hdr");
    if (!fs::is_regular_file(p)) throw ValidationError("missing render for test view " + view_suffix(t.index) + ": " + p.string());
    if (perceptual_dir) detail::require_file(*perceptual_dir / ("lpips_" + view_suffix(t.index) + ".hdr"));
  }
  MetricsReport rep;
  rep.views.resize(d.tests.size());
  parallel_chunks(d.tests.size(), 1, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& t = d.tests[i];
      const std::string s = view_suffix(t.index);
      const TonemappedImage gt = read_png_rgb(t.image);
      const Mask mask = test_view_mask(t, gt);
      const LinearImage render = read_rgbe(renders_dir / ("render_" + s + ".hdr"));
      std::optional<ScalarImage> dist;
      if (perceptual_dir) {
        const LinearImage m = read_rgbe(*perceptual_dir / ("lpips_" + s + ".hdr"));
        require(m.width() == gt.width() && m.height() == gt.height(), "perceptual map size does not match");
        dist = ScalarImage(m.width(), m.height());
        for (int y = 0; y < m.height(); ++y)
          for (int x = 0; x < m.width(); ++x) dist->at(x, y, 0) = m.at(x, y, 0);
      }
      ViewScore v = score_view(render, gt, mask, dist ? &*dist : nullptr);
      v.object = d.name;
      v.env = t.env_id;
      v.category = t.category;
      v.same_environment = t.same_environment;
      v.view = t.index;
      rep.views[i] = std::move(v);
    }
  });
  fill_aggregates(rep);
  return rep;
}

inline std::string format_metric(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return format_double(v);
}

inline double parse_metric(const std::string& s) {
  if (s == "nan" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  const auto v = parse_numbers(s, "metrics csv");
  if (v.size() != 1) throw ValidationError("metrics csv: bad value '" + s + "'");
  return v[0];
}

inline const char* kCsvHeader = "object,env,view,psnr_db,ssim,perceptual,ev_r,ev_g,ev_b";

inline std::string report_csv(const MetricsReport& rep) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& v : rep.views) {
    out += v.object + "," + v.env + "," + view_suffix(v.view) + "," + format_metric(v.psnr_db) + "," +
           format_metric(v.ssim) + "," + format_metric(v.perceptual) + "," + format_metric(v.ev[0]) + "," +
           format_metric(v.ev[1]) + "," + format_metric(v.ev[2]) + "\n";
  }
  return out;
}

inline nlohmann::json metric_json(double v) {
  if (std::isfinite(v)) return v;
  return format_metric(v);
}

inline nlohmann::json aggregate_json(const ScoreAggregate& a) {
  return {{"count", a.count},
          {"psnr_db", metric_json(a.psnr_db)},
          {"ssim", metric_json(a.ssim)},
          {"perceptual", metric_json(a.perceptual)}};
}

inline nlohmann::json report_json(const MetricsReport& rep) {
  nlohmann::json views = nlohmann::json::array();
  for (const auto& v : rep.views)
    views.push_back({{"object", v.object},
                     {"env", v.env},
                     {"category", v.category},
                     {"same_environment", v.same_environment},
                     {"view", view_suffix(v.view)},
                     {"psnr_db", metric_json(v.psnr_db)},
                     {"ssim", metric_json(v.ssim)},
                     {"perceptual", metric_json(v.perceptual)},
                     {"ev", {v.ev[0], v.ev[1], v.ev[2]}}});
  nlohmann::json cats = nlohmann::json::object();
  for (const auto& [k, a] : rep.by_category) cats[k] = aggregate_json(a);
  return {{"views", views},
          {"by_category", cats},
          {"same_environment", aggregate_json(rep.same_environment)},
          {"new_environment", aggregate_json(rep.new_environment)},
          {"overall", aggregate_json(rep.overall)}};
}

/// Reads the per-view rows of a CSV written by report_csv().
inline std::vector<ViewScore> read_report_csv(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw ValidationError(path.string() + ": header is not '" + std::string(kCsvHeader) + "'");
  std::vector<ViewScore> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      f.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != 9) throw ValidationError(path.string() + ": expected 9 columns in '" + line + "'");
    ViewScore v;
    v.object = f[0];
    v.env = f[1];
    v.view = static_cast<int>(parse_metric(f[2]));
    v.psnr_db = parse_metric(f[3]);
    v.ssim = parse_metric(f[4]);
    v.perceptual = parse_metric(f[5]);
    v.ev = Rgb(parse_metric(f[6]), parse_metric(f[7]), parse_metric(f[8]));
    rows.push_back(v);
  }
  if (rows.empty()) throw ValidationError(path.string() + ": no rows");
  return rows;
}

struct MethodSummary {
  std::string name;
  ScoreAggregate relight;
  ScoreAggregate nvs;
};

struct MetricCorrelation {
  std::string metric;
  SpearmanResult result;
};

struct Comparison {
  std::vector<MethodSummary> methods;
  std::vector<MetricCorrelation> correlations;
};

namespace detail {

inline std::set<std::tuple<std::string, std::string, int>> view_keys(const std::vector<ViewScore>& rows) {
  std::set<std::tuple<std::string, std::string, int>> keys;
  for (const auto& r : rows) keys.insert({r.object, r.env, r.view});
  return keys;
}

inline ScoreAggregate mean_of(const std::vector<ViewScore>& rows) {
  std::vector<const ViewScore*> p;
  for (const auto& r : rows) p.push_back(&r);
  return aggregate_scores(p);
}

/// Rank correlation across methods; two methods give r = +-1 with exact p = 1.
inline SpearmanResult rank_correlation(const std::vector<double>& x, const std::vector<double>& y) {
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::isnan(x[i]) || std::isnan(y[i])) return {};
  if (x.size() >= 3) return spearman(x, y);
  SpearmanResult r;
  if (x[0] == x[1] || y[0] == y[1]) return r;
  r.defined = true;
  r.exact = true;
  r.r = (x[0] < x[1]) == (y[0] < y[1]) ? 1.0 : -1.0;
  r.p = 1.0;
  return r;
}

}  // namespace detail

/// Compares methods: relighting scores against novel-view scores, one pair of CSVs per method.
inline Comparison compare_methods(const std::vector<std::string>& names, const std::vector<fs::path>& relight_csvs,
                                  const std::vector<fs::path>& nvs_csvs) {
  require(names.size() >= 2, "report needs at least two methods");
  require(names.size() == relight_csvs.size() && names.size() == nvs_csvs.size(),
          "report needs one relighting and one novel-view CSV per method");
  Comparison cmp;
  std::optional<std::set<std::tuple<std::string, std::string, int>>> relight_keys, nvs_keys;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto rel = read_report_csv(relight_csvs[i]);
    const auto nvs = read_report_csv(nvs_csvs[i]);
    const auto rk = detail::view_keys(rel), nk = detail::view_keys(nvs);
    if (relight_keys && *relight_keys != rk)
      throw ValidationError("misaligned view sets: " + relight_csvs[i].string() + " differs from " + relight_csvs[0].string());
    if (nvs_keys && *nvs_keys != nk)
      throw ValidationError("misaligned view sets: " + nvs_csvs[i].string() + " differs from " + nvs_csvs[0].string());
    relight_keys = rk;
    nvs_keys = nk;
    cmp.methods.push_back({names[i], detail::mean_of(rel), detail::mean_of(nvs)});
  }
  auto column = [&](auto field, bool relight) {
    std::vector<double> v;
    for (const auto& m : cmp.methods) v.push_back(field(relight ? m.relight : m.nvs));
    return v;
  };
  const std::vector<std::pair<std::string, std::function<double(const ScoreAggregate&)>>> metrics = {
      {"psnr_db", [](const ScoreAggregate& a) { return a.psnr_db; }},
      {"ssim", [](const ScoreAggregate& a) { return a.ssim; }},
      {"perceptual", [](const ScoreAggregate& a) { return a.perceptual; }}};
  for (const auto& [name, field] : metrics)
    cmp.correlations.push_back({name, detail::rank_correlation(column(field, true), column(field, false))});
  return cmp;
}

inline std::string comparison_table(const Comparison& cmp) {
  std::string out = "method,relight_psnr_db,relight_ssim,relight_perceptual,nvs_psnr_db,nvs_ssim,nvs_perceptual\n";
  for (const auto& m : cmp.methods)
    out += m.name + "," + format_metric(m.relight.psnr_db) + "," + format_metric(m.relight.ssim) + "," +
           format_metric(m.relight.perceptual) + "," + format_metric(m.nvs.psnr_db) + "," +
           format_metric(m.nvs.ssim) + "," + format_metric(m.nvs.perceptual) + "\n";
  out += "\nmetric,spearman_r,p_value,p_exact\n";
  for (const auto& c : cmp.correlations)
    out += c.metric + "," + format_metric(c.result.r) + "," + format_metric(c.result.p) + "," +
           (c.result.defined ? (c.result.exact ? "yes" : "no") : "undefined") + "\n";
  return out;
}

}  // namespace relit
