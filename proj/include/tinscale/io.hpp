#pragma once

// On-disk formats: scale-space store, transition log, feature tables,
// ground truth and metric tables. Every writer goes through atomic_write.

#include <bit>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "tinscale/core.hpp"
#include "tinscale/eval.hpp"
#include "tinscale/pointcloud.hpp"
#include "tinscale/smoothing.hpp"
#include "tinscale/tin.hpp"
#include "tinscale/tracking.hpp"

namespace tinscale {

namespace fs = std::filesystem;

// Shortest representation that round-trips.
inline std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  TINSCALE_CHECK(ec == std::errc(), "format_real overflow");
  return {buf, ptr};
}

// Writes through a temporary sibling file and renames it into place.
inline void atomic_write(const fs::path& path, const std::function<void(std::ostream&)>& body,
                         std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, mode | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    try {
      body(out);
    } catch (...) {
      out.close();
      fs::remove(tmp);
      throw;
    }
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw DataError("write failed for '" + path.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw DataError("cannot move output into place at '" + path.string() + "': " + ec.message());
  }
}

inline void save_points(const fs::path& path, const RawPointCloud& cloud) {
  atomic_write(path, [&](std::ostream& out) { write_xyz(out, cloud); });
}

inline void save_tin(const fs::path& path, const Tin& tin) {
  atomic_write(path, [&](std::ostream& out) { write_tin(out, tin); });
}

inline void save_json(const fs::path& path, const nlohmann::json& j) {
  atomic_write(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

// ---------------------------------------------------------------------------
// Scale-space store: manifest.json plus layer_NNN.f64 files of V little
// endian doubles.

inline nlohmann::json to_json(const SmoothingConfig& c) {
  return {{"sigma_small", c.sigma_small},
          {"tau", c.tau},
          {"angle_reweight", c.angle_reweight},
          {"virtual_neighbors", c.virtual_neighbors},
          {"num_layers", c.num_layers},
          {"base_variance", c.base_variance},
          {"step_variance", c.step_variance == StepVariance::Nominal ? "nominal" : "calibrated"}};
}

inline std::string layer_file_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "layer_%03d.f64", i);
  return buf;
}

namespace detail {

inline std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}

}  // namespace detail

inline void write_layer(std::ostream& out, std::span<const double> values) {
  std::vector<char> buf(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = detail::to_little(std::bit_cast<std::uint64_t>(values[i]));
    std::memcpy(buf.data() + 8 * i, &bits, 8);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline std::vector<double> read_layer(const fs::path& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open layer file '" + path.string() + "'");
  std::vector<char> buf(count * 8);
  in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()) || in.peek() != std::char_traits<char>::eof()) {
    throw DataError("layer file '" + path.string() + "' does not hold " + std::to_string(count) + " values");
  }
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, buf.data() + 8 * i, 8);
    out[i] = std::bit_cast<double>(detail::to_little(bits));
  }
  return out;
}

inline void save_scale_space(const fs::path& dir, const ScaleSpace& ss, const SmoothingConfig& cfg) {
  fs::create_directories(dir);
  for (int i = 0; i <= ss.num_layers(); ++i) {
    atomic_write(dir / layer_file_name(i), [&](std::ostream& out) { write_layer(out, ss.layer(i)); },
                 std::ios::out | std::ios::binary);
  }
  nlohmann::json m;
  m["V"] = ss.num_vertices();
  m["L"] = ss.num_layers();
  m["layer_variances"] = ss.layer_variances;
  m["iterations"] = ss.iterations;
  m["step_variance"] = ss.step_variance;
  m["config"] = to_json(cfg);
  std::vector<std::string> files;
  for (int i = 0; i <= ss.num_layers(); ++i) files.push_back(layer_file_name(i));
  m["layers"] = files;
  save_json(dir / "manifest.json", m);
}

inline ScaleSpace load_scale_space(const fs::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw DataError("missing scale space manifest '" + manifest_path.string() + "'");
  nlohmann::json m;
  try {
    in >> m;
    ScaleSpace ss;
    const auto V = m.at("V").get<std::size_t>();
    const auto L = m.at("L").get<int>();
    if (L < 1) throw DataError("scale space must have at least two layers");
    ss.layer_variances = m.at("layer_variances").get<std::vector<double>>();
    if (ss.layer_variances.size() != static_cast<std::size_t>(L) + 1) throw DataError("manifest layer_variances length mismatch");
    if (m.contains("iterations")) ss.iterations = m["iterations"].get<std::vector<int>>();
    if (m.contains("step_variance")) ss.step_variance = m["step_variance"].get<double>();
    for (int i = 0; i <= L; ++i) ss.layers.push_back(read_layer(dir / layer_file_name(i), V));
    return ss;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad manifest '" + manifest_path.string() + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Tracking outputs

inline void write_transitions_csv(std::ostream& out, std::span<const TransitionRecord> records) {
  out << "t,layer,edge_m,edge_n,kind,before_m,before_n,after_m,after_n,trace_ids\n";
  for (const auto& r : records) {
    out << format_real(r.event.t) << ',' << r.event.layer << ',' << r.event.edge.a << ',' << r.event.edge.b << ','
        << to_string(r.kind) << ',' << to_string(r.before.first) << ',' << to_string(r.before.second) << ','
        << to_string(r.after.first) << ',' << to_string(r.after.second) << ',';
    for (std::size_t k = 0; k < r.traces.size(); ++k) out << (k ? ";" : "") << r.traces[k];
    out << '\n';
  }
}

// A tracked critical point in output form, located where it was born.
struct Feature {
  Index id = 0;
  Point3 position;
  TraceKind kind = TraceKind::Maximum;
  Origin origin = Origin::Initial;
  double birth_t = 0.0;
  std::optional<double> death_t;
  double life_span = 0.0;
};

// Non-synthetic traces with life spans: recovered spans for initial traces,
// (death or L) - birth for newborn ones.
inline std::vector<Feature> make_features(const Tin& tin, const TrackingResult& tr, const LifeSpanTable& spans) {
  std::vector<Feature> out;
  const double L = static_cast<double>(tr.num_layers);
  for (const auto& t : tr.traces) {
    if (t.synthetic) continue;
    Feature f;
    f.id = t.id;
    f.position = tin.vertex(t.birth_vertex);
    f.kind = t.kind;
    f.origin = t.origin;
    f.birth_t = t.birth_t;
    f.death_t = t.death_t;
    if (t.origin == Origin::Initial) {
      const auto* e = spans.find(t.id);
      TINSCALE_CHECK(e != nullptr, "initial trace without life span");
      f.life_span = e->life_span;
    } else {
      f.life_span = t.death_t.value_or(L) - t.birth_t;
    }
    out.push_back(f);
  }
  return out;
}

inline std::vector<RankedMaximum> initial_maxima(std::span<const Feature> features) {
  std::vector<RankedMaximum> out;
  for (const auto& f : features) {
    if (f.kind == TraceKind::Maximum && f.origin == Origin::Initial) {
      out.push_back({f.id, f.position.x, f.position.y, f.life_span});
    }
  }
  return out;
}

inline void write_features_csv(std::ostream& out, std::span<const Feature> features) {
  out << "id,x,y,z,kind,origin,birth_t,death_t,life_span\n";
  for (const auto& f : features) {
    out << f.id << ',' << format_real(f.position.x) << ',' << format_real(f.position.y) << ','
        << format_real(f.position.z) << ',' << to_string(f.kind) << ',' << to_string(f.origin) << ','
        << format_real(f.birth_t) << ',' << (f.death_t ? format_real(*f.death_t) : std::string()) << ','
        << format_real(f.life_span) << '\n';
  }
}

inline nlohmann::json features_geojson(std::span<const Feature> features) {
  nlohmann::json fc;
  fc["type"] = "FeatureCollection";
  fc["features"] = nlohmann::json::array();
  for (const auto& f : features) {
    nlohmann::json props{{"id", f.id},
                         {"z", f.position.z},
                         {"kind", to_string(f.kind)},
                         {"origin", to_string(f.origin)},
                         {"birth_t", f.birth_t},
                         {"death_t", f.death_t ? nlohmann::json(*f.death_t) : nlohmann::json(nullptr)},
                         {"life_span", f.life_span}};
    fc["features"].push_back({{"type", "Feature"},
                              {"geometry", {{"type", "Point"}, {"coordinates", {f.position.x, f.position.y, f.position.z}}}},
                              {"properties", std::move(props)}});
  }
  return fc;
}

namespace detail {

// Splits one CSV record, honouring double-quoted fields.
inline std::vector<std::string> split_csv_record(std::string_view line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  if (quoted) throw DataError("unterminated quote");
  return out;
}

}  // namespace detail

inline std::vector<Feature> read_features_csv(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw DataError(source + ": empty feature file");
  std::vector<Feature> out;
  auto fail = [&](const std::string& what) { throw DataError(source + ":" + std::to_string(line_no) + ": " + what); };
  auto num = [&](const std::string& s) {
    double v;
    if (!detail::parse_double(s, v)) fail("bad number '" + s + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv_record(line);
    if (f.size() != 9) fail("expected 9 fields");
    Feature ft;
    ft.id = static_cast<Index>(num(f[0]));
    ft.position = {num(f[1]), num(f[2]), num(f[3])};
    if (f[4] == "MAXIMUM") ft.kind = TraceKind::Maximum;
    else if (f[4] == "MINIMUM") ft.kind = TraceKind::Minimum;
    else if (f[4] == "SADDLE") ft.kind = TraceKind::Saddle;
    else fail("unknown kind '" + f[4] + "'");
    if (f[5] == "INITIAL") ft.origin = Origin::Initial;
    else if (f[5] == "NEWBORN") ft.origin = Origin::Newborn;
    else fail("unknown origin '" + f[5] + "'");
    ft.birth_t = num(f[6]);
    if (!f[7].empty()) ft.death_t = num(f[7]);
    ft.life_span = num(f[8]);
    out.push_back(ft);
  }
  return out;
}

inline std::vector<Feature> load_features(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature file '" + path.string() + "'");
  return read_features_csv(in, path.string());
}

// ---------------------------------------------------------------------------
// Ground truth and metric tables

inline GroundTruth read_ground_truth(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) { throw DataError(source + ":" + std::to_string(line_no) + ": " + what); };
  std::array<int, 4> col{-1, -1, -1, -1};
  std::size_t ncols = 0;
  bool header = false;
  GroundTruth gt;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> f;
    try {
      f = detail::split_csv_record(line);
    } catch (const DataError& e) {
      fail(e.what());
    }
    if (!header) {
      const char* names[4] = {"x", "y", "name", "is_named_peak"};
      for (std::size_t i = 0; i < f.size(); ++i) {
        const auto n = detail::lower(f[i]);
        for (int k = 0; k < 4; ++k) {
          if (n == names[k]) col[k] = static_cast<int>(i);
        }
      }
      if (col[0] < 0 || col[1] < 0) fail("ground truth header must contain x and y");
      ncols = f.size();
      header = true;
      continue;
    }
    if (f.size() != ncols) fail("expected " + std::to_string(ncols) + " fields");
    Spot s;
    if (!detail::parse_double(f[col[0]], s.x) || !detail::parse_double(f[col[1]], s.y)) fail("bad coordinate");
    if (col[2] >= 0) s.name = f[col[2]];
    if (col[3] >= 0) {
      const auto v = detail::lower(f[col[3]]);
      if (v == "1" || v == "true" || v == "yes") s.is_named_peak = true;
      else if (v == "0" || v == "false" || v == "no" || v.empty()) s.is_named_peak = false;
      else fail("bad is_named_peak value '" + f[col[3]] + "'");
    }
    gt.spots.push_back(std::move(s));
  }
  if (!header) throw DataError(source + ": empty ground truth file");
  gt.validate();
  return gt;
}

inline GroundTruth load_ground_truth(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ground truth '" + path.string() + "'");
  return read_ground_truth(in, path.string());
}

inline void write_ground_truth_csv(std::ostream& out, const GroundTruth& gt) {
  out << "x,y,name,is_named_peak\n";
  for (const auto& s : gt.spots) {
    out << format_real(s.x) << ',' << format_real(s.y) << ",\"";
    for (char c : s.name) out << (c == '"' ? std::string("\"\"") : std::string(1, c));
    out << "\"," << (s.is_named_peak ? 1 : 0) << '\n';
  }
}

inline void write_pr_csv(std::ostream& out, const PrCurve& curve) {
  out << "threshold,precision,recall,f_beta\n";
  for (const auto& p : curve.points) {
    out << format_real(p.threshold) << ',' << format_real(p.precision) << ',' << format_real(p.recall) << ','
        << format_real(p.f_beta) << '\n';
  }
}

struct SweepRow {
  std::size_t resolution = 0;  // target vertex count
  double f_beta = 0.0;
  double dist_avg = 0.0;
  std::string error;  // non-empty when the row failed
};

inline void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "resolution,f_beta,dist_avg\n";
  for (const auto& r : rows) {
    if (!r.error.empty()) {
      out << r.resolution << ",,\n";
      continue;
    }
    out << r.resolution << ',' << format_real(r.f_beta) << ',' << format_real(r.dist_avg) << '\n';
  }
}

}  // namespace tinscale
