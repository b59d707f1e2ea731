#pragma once

// Pipeline stages with on-disk artifacts, driven by a flat key=value
// configuration.
//
// Stage outputs inside the output directory:
//   downsample  -> points.xyz, downsample_report.json
//   triangulate -> tin.txt, triangulate_report.json
//   smooth      -> scale_space/ (manifest.json + layer files), smooth_report.json
//   track       -> features.csv, features.geojson, transitions.csv, track_report.json
//   evaluate    -> pr.csv, evaluate_report.json
//   sweep       -> sweep.csv, sweep/<target>/...

#include <chrono>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <sys/resource.h>

#include <nlohmann/json.hpp>

#include "tinscale/core.hpp"
#include "tinscale/eval.hpp"
#include "tinscale/io.hpp"
#include "tinscale/pointcloud.hpp"
#include "tinscale/smoothing.hpp"
#include "tinscale/tin.hpp"
#include "tinscale/tracking.hpp"

namespace tinscale {

using KeyValues = std::map<std::string, std::string>;

// "key = value" lines; '#' starts a comment, blank lines are ignored.
inline KeyValues parse_key_values(std::istream& in, const std::string& source = "<config>") {
  KeyValues kv;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(source + ":" + std::to_string(line_no) + ": expected key = value");
    }
    auto key = trim(line.substr(0, eq));
    if (key.empty()) throw UsageError(source + ":" + std::to_string(line_no) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline KeyValues load_key_values(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path.string() + "'");
  return parse_key_values(in, path.string());
}

struct PipelineConfig {
  fs::path input;             // raw point cloud
  fs::path output = "tinscale_out";
  std::string format = "auto";  // auto | xyz | csv
  DownsampleConfig downsample;
  std::vector<Sampler> compare_samplers;  // extra samplers for the downsample report
  std::optional<double> alpha;  // empty: automatic (alpha_factor x median edge length)
  double alpha_factor = 3.0;
  SmoothingConfig smoothing;
  EvalConfig eval;
  fs::path ground_truth;
  std::vector<std::size_t> sweep;  // target vertex counts
  std::uint64_t seed = 0;
  bool geojson = true;

  // Optional explicit stage inputs; default to the artifacts in `output`.
  fs::path points_path, tin_path, scale_space_path, features_path;

  fs::path points_file() const { return points_path.empty() ? output / "points.xyz" : points_path; }
  fs::path tin_file() const { return tin_path.empty() ? output / "tin.txt" : tin_path; }
  fs::path scale_space_dir() const { return scale_space_path.empty() ? output / "scale_space" : scale_space_path; }
  fs::path features_file() const { return features_path.empty() ? output / "features.csv" : features_path; }

  void validate() const {
    downsample.validate();
    smoothing.validate();
    eval.validate();
    if (alpha && !(*alpha > 0.0)) throw UsageError("alpha must be > 0");
    if (!(alpha_factor > 0.0)) throw UsageError("alpha_factor must be > 0");
    if (format != "auto" && format != "xyz" && format != "csv") throw UsageError("format must be auto, xyz or csv");
    for (auto n : sweep) {
      if (n < 3) throw UsageError("sweep target vertex counts must be >= 3");
    }
  }
};

namespace detail {

inline double parse_real(const std::string& key, const std::string& v) {
  double out;
  const auto lv = lower(v);
  if (lv == "inf" || lv == "infinity") return std::numeric_limits<double>::infinity();
  if (!parse_double(v, out)) throw UsageError("'" + key + "' expects a number, got '" + v + "'");
  return out;
}

inline long long parse_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw UsageError("'" + key + "' expects an integer, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  const auto lv = lower(v);
  if (lv == "1" || lv == "true" || lv == "yes" || lv == "on") return true;
  if (lv == "0" || lv == "false" || lv == "no" || lv == "off") return false;
  throw UsageError("'" + key + "' expects a boolean, got '" + v + "'");
}

inline std::vector<std::string> parse_list(const std::string& v) {
  std::vector<std::string> out;
  for (auto tok : split(v, ',')) {
    auto s = lower(tok);
    if (!s.empty()) out.push_back(s);
  }
  return out;
}

}  // namespace detail

inline void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "input") cfg.input = value;
  else if (key == "output") cfg.output = value;
  else if (key == "format") cfg.format = lower(value);
  else if (key == "sampler") cfg.downsample.sampler = parse_sampler(value);
  else if (key == "compare_samplers") {
    cfg.compare_samplers.clear();
    for (const auto& s : parse_list(value)) cfg.compare_samplers.push_back(parse_sampler(s));
  }
  else if (key == "keep_ratio") cfg.downsample.keep_ratio = parse_real(key, value);
  else if (key == "patch_size") cfg.downsample.patch_size = parse_real(key, value);
  else if (key == "curvature") cfg.downsample.curvature_mode = parse_curvature_mode(value);
  else if (key == "alpha") {
    if (lower(value) == "auto") cfg.alpha.reset();
    else cfg.alpha = parse_real(key, value);
  }
  else if (key == "alpha_factor") cfg.alpha_factor = parse_real(key, value);
  else if (key == "sigma_small") cfg.smoothing.sigma_small = lower(value) == "auto" ? 0.0 : parse_real(key, value);
  else if (key == "tau") cfg.smoothing.tau = lower(value) == "auto" ? 0.0 : parse_real(key, value);
  else if (key == "angle_reweight") cfg.smoothing.angle_reweight = parse_bool(key, value);
  else if (key == "virtual_neighbors") cfg.smoothing.virtual_neighbors = parse_bool(key, value);
  else if (key == "num_layers") cfg.smoothing.num_layers = static_cast<int>(parse_integer(key, value));
  else if (key == "base_variance") cfg.smoothing.base_variance = parse_real(key, value);
  else if (key == "step_variance") {
    const auto v = lower(value);
    if (v == "nominal") cfg.smoothing.step_variance = StepVariance::Nominal;
    else if (v == "calibrated") cfg.smoothing.step_variance = StepVariance::Calibrated;
    else throw UsageError("step_variance must be nominal or calibrated");
  }
  else if (key == "radius") cfg.eval.radius = parse_real(key, value);
  else if (key == "beta") cfg.eval.beta = parse_real(key, value);
  else if (key == "ground_truth") cfg.ground_truth = value;
  else if (key == "sweep") {
    cfg.sweep.clear();
    for (const auto& s : parse_list(value)) {
      const auto n = parse_integer(key, s);
      if (n <= 0) throw UsageError("sweep entries must be positive");
      cfg.sweep.push_back(static_cast<std::size_t>(n));
    }
  }
  else if (key == "seed") {
    const auto n = parse_integer(key, value);
    if (n < 0) throw UsageError("seed must be non-negative");
    cfg.seed = static_cast<std::uint64_t>(n);
    cfg.downsample.rng_seed = cfg.seed;
  }
  else if (key == "geojson") cfg.geojson = parse_bool(key, value);
  else if (key == "points") cfg.points_path = value;
  else if (key == "tin") cfg.tin_path = value;
  else if (key == "scale_space") cfg.scale_space_path = value;
  else if (key == "features") cfg.features_path = value;
  else throw UsageError("unknown setting '" + key + "'");
}

inline void apply_settings(PipelineConfig& cfg, const KeyValues& kv) {
  for (const auto& [k, v] : kv) apply_setting(cfg, k, v);
}

// ---------------------------------------------------------------------------

inline long peak_rss_kib() {
  rusage ru{};
  if (getrusage(RUSAGE_SELF, &ru) != 0) return -1;
  return ru.ru_maxrss;  // KiB on Linux
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline LoadedCloud load_input_cloud(const PipelineConfig& cfg) {
  if (cfg.input.empty()) throw UsageError("no input point file given (set input=...)");
  const auto path = cfg.input.string();
  PointFormat fmt = cfg.format == "auto" ? guess_format(path) : (cfg.format == "csv" ? PointFormat::Csv : PointFormat::Xyz);
  return load_points(path, fmt);
}

inline nlohmann::json run_downsample(const PipelineConfig& cfg) {
  cfg.validate();
  const auto loaded = load_input_cloud(cfg);
  auto dcfg = cfg.downsample;
  dcfg.rng_seed = cfg.seed;
  nlohmann::json report;
  report["input_points"] = loaded.cloud.size();
  report["duplicates_removed"] = loaded.duplicates_removed;
  report["seed"] = cfg.seed;
  report["keep_ratio"] = dcfg.keep_ratio;

  Stopwatch sw;
  RawPointCloud out;
  if (dcfg.sampler == Sampler::Pfps) {
    auto res = pfps_detailed(loaded.cloud, dcfg);
    report["patches"] = res.patches.size();
    out = std::move(res.cloud);
  } else {
    out = downsample(loaded.cloud, dcfg);
  }
  report["sampler"] = to_string(dcfg.sampler);
  report["output_points"] = out.size();
  report["seconds"] = sw.seconds();
  save_points(cfg.output / "points.xyz", out);

  if (!cfg.compare_samplers.empty()) {
    nlohmann::json cmp = nlohmann::json::object();
    for (auto s : cfg.compare_samplers) {
      auto c = dcfg;
      c.sampler = s;
      Stopwatch t;
      const auto pts = downsample(loaded.cloud, c);
      const auto name = detail::lower(to_string(s));
      save_points(cfg.output / ("points_" + name + ".xyz"), pts);
      cmp[to_string(s)] = {{"output_points", pts.size()}, {"seconds", t.seconds()}};
    }
    report["comparison"] = cmp;
  }
  save_json(cfg.output / "downsample_report.json", report);
  return report;
}

inline nlohmann::json run_triangulate(const PipelineConfig& cfg) {
  cfg.validate();
  const auto loaded = load_points(cfg.points_file().string(), guess_format(cfg.points_file().string()));
  Stopwatch sw;
  const Tin full = delaunay_triangulate(loaded.cloud);
  const double alpha = cfg.alpha ? *cfg.alpha : cfg.alpha_factor * full.median_edge_length();
  const Tin tin = std::isinf(alpha) ? full : alpha_shape_filter(full, {alpha});
  save_tin(cfg.tin_file(), tin);
  nlohmann::json report{{"input_points", loaded.cloud.size()},
                        {"alpha", std::isinf(alpha) ? nlohmann::json("inf") : nlohmann::json(alpha)},
                        {"delaunay_triangles", full.num_triangles()},
                        {"removed_triangles", full.num_triangles() - tin.num_triangles()},
                        {"V", tin.num_vertices()},
                        {"E", tin.edges().size()},
                        {"T", tin.num_triangles()},
                        {"components", tin.num_components()},
                        {"seconds", sw.seconds()}};
  save_json(cfg.output / "triangulate_report.json", report);
  return report;
}

inline nlohmann::json run_smooth(const PipelineConfig& cfg) {
  cfg.validate();
  const Tin tin = load_tin(cfg.tin_file().string());
  const auto resolved = cfg.smoothing.resolved(tin);
  Stopwatch sw;
  const auto ss = build_scale_space(tin, resolved);
  const double t_ss = sw.seconds();
  save_scale_space(cfg.scale_space_dir(), ss, resolved);
  nlohmann::json report{{"V", tin.num_vertices()},
                        {"L", ss.num_layers()},
                        {"config", to_json(resolved)},
                        {"step_variance", ss.step_variance},
                        {"iterations", ss.iterations},
                        {"seconds", t_ss},
                        {"peak_rss_kib", peak_rss_kib()}};
  save_json(cfg.output / "smooth_report.json", report);
  return report;
}

struct TrackOutputs {
  TrackingResult result;
  LifeSpanTable spans;
  std::vector<Feature> features;
};

inline TrackOutputs track_and_recover(const Tin& tin, const ScaleSpace& ss) {
  TrackOutputs out;
  out.result = track_scale_space(tin, ss);
  out.spans = recover_life_spans(out.result.traces, out.result.num_layers);
  out.features = make_features(tin, out.result, out.spans);
  return out;
}

inline nlohmann::json run_track(const PipelineConfig& cfg) {
  cfg.validate();
  const Tin tin = load_tin(cfg.tin_file().string());
  const auto ss = load_scale_space(cfg.scale_space_dir());
  if (ss.num_vertices() != tin.num_vertices()) {
    throw DataError("scale space has " + std::to_string(ss.num_vertices()) + " values per layer but the TIN has " +
                    std::to_string(tin.num_vertices()) + " vertices");
  }
  Stopwatch sw;
  const auto out = track_and_recover(tin, ss);
  const double seconds = sw.seconds();

  atomic_write(cfg.features_file(), [&](std::ostream& os) { write_features_csv(os, out.features); });
  if (cfg.geojson) {
    auto gj = cfg.features_file();
    gj.replace_extension(".geojson");
    save_json(gj, features_geojson(out.features));
  }
  atomic_write(cfg.output / "transitions.csv",
               [&](std::ostream& os) { write_transitions_csv(os, out.result.transitions); });

  std::map<std::string, std::size_t> by_kind;
  for (const auto& r : out.result.transitions) ++by_kind[to_string(r.kind)];
  std::size_t events = 0;
  for (auto n : out.result.events_per_layer) events += n;
  std::size_t maxima = 0, survivors = 0;
  for (const auto& e : out.spans.entries) {
    if (out.result.traces[e.trace].kind != TraceKind::Maximum) continue;
    ++maxima;
    if (e.terminal == Terminal::Survived) ++survivors;
  }
  nlohmann::json report{{"V", tin.num_vertices()},
                        {"E", tin.edges().size()},
                        {"L", ss.num_layers()},
                        {"events", events},
                        {"events_per_layer", out.result.events_per_layer},
                        {"transitions", by_kind},
                        {"traces", out.result.traces.size()},
                        {"initial_maxima", maxima},
                        {"surviving_maxima", survivors},
                        {"seconds", seconds},
                        {"peak_rss_kib", peak_rss_kib()}};
  save_json(cfg.output / "track_report.json", report);
  return report;
}

inline nlohmann::json run_evaluate(const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.ground_truth.empty()) throw UsageError("no ground truth given (set ground_truth=...)");
  const auto gt = load_ground_truth(cfg.ground_truth);
  if (gt.spots.empty()) throw DataError("ground truth is empty");
  const auto features = load_features(cfg.features_file());
  const auto maxima = initial_maxima(features);
  if (maxima.empty()) throw DataError("feature file holds no maxima");
  const auto curve = pr_sweep(maxima, gt, cfg.eval);
  atomic_write(cfg.output / "pr.csv", [&](std::ostream& os) { write_pr_csv(os, curve); });
  const auto& best = curve.best_point();
  nlohmann::json report{{"maxima", maxima.size()},
                        {"spots", gt.spots.size()},
                        {"radius", cfg.eval.radius},
                        {"beta", cfg.eval.beta},
                        {"best_threshold", best.threshold},
                        {"best_precision", best.precision},
                        {"best_recall", best.recall},
                        {"best_f_beta", best.f_beta},
                        {"dist_avg_best", best.dist_avg},
                        {"dist_avg_all", curve.dist_avg_all}};
  save_json(cfg.output / "evaluate_report.json", report);
  return report;
}

inline nlohmann::json run_pipeline(const PipelineConfig& cfg) {
  nlohmann::json report;
  report["downsample"] = run_downsample(cfg);
  report["triangulate"] = run_triangulate(cfg);
  report["smooth"] = run_smooth(cfg);
  report["track"] = run_track(cfg);
  if (!cfg.ground_truth.empty()) report["evaluate"] = run_evaluate(cfg);
  return report;
}

// Re-runs the whole pipeline once per target vertex count, each in its own
// subdirectory. A failing row is reported and the sweep continues.
inline std::vector<SweepRow> run_sweep(const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.sweep.empty()) throw UsageError("no sweep resolutions given (set sweep=n1,n2,...)");
  if (cfg.ground_truth.empty()) throw UsageError("sweep needs ground_truth");
  const auto n_input = load_input_cloud(cfg).cloud.size();
  std::vector<SweepRow> rows;
  nlohmann::json details = nlohmann::json::array();
  for (auto target : cfg.sweep) {
    SweepRow row;
    row.resolution = target;
    auto sub = cfg;
    sub.output = cfg.output / "sweep" / std::to_string(target);
    sub.points_path.clear();
    sub.tin_path.clear();
    sub.scale_space_path.clear();
    sub.features_path.clear();
    sub.downsample.keep_ratio = std::min(1.0, static_cast<double>(target) / static_cast<double>(n_input));
    nlohmann::json d{{"target", target}};
    try {
      const auto rep = run_pipeline(sub);
      row.f_beta = rep["evaluate"]["best_f_beta"].get<double>();
      row.dist_avg = rep["evaluate"]["dist_avg_best"].get<double>();
      d["V"] = rep["triangulate"]["V"];
      d["f_beta"] = row.f_beta;
    } catch (const std::exception& e) {
      row.error = e.what();
      d["error"] = row.error;
    }
    details.push_back(d);
    rows.push_back(row);
  }
  atomic_write(cfg.output / "sweep.csv", [&](std::ostream& os) { write_sweep_csv(os, rows); });
  save_json(cfg.output / "sweep_report.json", details);
  return rows;
}

}  // namespace tinscale
