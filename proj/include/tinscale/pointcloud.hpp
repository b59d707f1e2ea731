#pragma once

// Terrain point ingestion and curvature-adaptive downsampling (patch-based
// furthest point sampling plus the random / voxel / global FPS baselines).

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tinscale/core.hpp"

namespace tinscale {

struct RawPointCloud {
  std::vector<Point3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

enum class PointFormat { Xyz, Csv };
enum class Sampler { Pfps, Fps, Random, Voxel };
enum class CurvatureMode { SurfaceVariation, PaperLiteral };

struct DownsampleConfig {
  double patch_size = 20.0;  // meters
  double keep_ratio = 0.1;   // (0, 1]
  Sampler sampler = Sampler::Pfps;
  CurvatureMode curvature_mode = CurvatureMode::SurfaceVariation;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (!(patch_size > 0.0) || !std::isfinite(patch_size)) {
      throw UsageError("patch_size must be > 0");
    }
    if (!(keep_ratio > 0.0 && keep_ratio <= 1.0)) {
      throw UsageError("keep_ratio must be in (0, 1]");
    }
  }
};

struct Patch {
  std::int64_t row = 0;
  std::int64_t col = 0;
  std::vector<Index> points;               // indices into the source cloud
  std::array<double, 3> eigenvalues{};     // descending
  double curvature = 0.0;
  double weight = 0.0;
};

inline const char* to_string(Sampler s) {
  switch (s) {
    case Sampler::Pfps: return "PFPS";
    case Sampler::Fps: return "FPS";
    case Sampler::Random: return "RANDOM";
    case Sampler::Voxel: return "VOXEL";
  }
  return "?";
}

inline Sampler parse_sampler(std::string_view name) {
  std::string up(name);
  for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (up == "PFPS") return Sampler::Pfps;
  if (up == "FPS") return Sampler::Fps;
  if (up == "RANDOM") return Sampler::Random;
  if (up == "VOXEL") return Sampler::Voxel;
  throw UsageError("unknown sampler '" + std::string(name) + "'");
}

inline CurvatureMode parse_curvature_mode(std::string_view name) {
  std::string up(name);
  for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (up == "SURFACE_VARIATION") return CurvatureMode::SurfaceVariation;
  if (up == "PAPER_LITERAL") return CurvatureMode::PaperLiteral;
  throw UsageError("unknown curvature mode '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Loading

struct LoadedCloud {
  RawPointCloud cloud;
  std::size_t duplicates_removed = 0;
};

namespace detail {

inline bool parse_double(std::string_view tok, double& out) {
  while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
  while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' || tok.back() == '\r')) {
    tok.remove_suffix(1);
  }
  if (tok.empty()) return false;
  if (tok.front() == '+') tok.remove_prefix(1);
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == sep) {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  while (!out.empty() && std::isspace(static_cast<unsigned char>(out.back()))) out.pop_back();
  while (!out.empty() && std::isspace(static_cast<unsigned char>(out.front()))) out.erase(out.begin());
  return out;
}

struct XyKey {
  double x, y;
  bool operator==(const XyKey&) const = default;
};

struct XyKeyHash {
  std::size_t operator()(const XyKey& k) const {
    const auto hx = std::hash<double>{}(k.x);
    const auto hy = std::hash<double>{}(k.y);
    return hx ^ (hy + 0x9E3779B97F4A7C15ULL + (hx << 6) + (hx >> 2));
  }
};

}  // namespace detail

// Duplicate (x, y) sites keep the highest z; first-occurrence order is kept.
inline LoadedCloud deduplicate(const std::vector<Point3>& pts) {
  LoadedCloud out;
  std::unordered_map<detail::XyKey, std::size_t, detail::XyKeyHash> seen;
  seen.reserve(pts.size());
  for (const auto& p : pts) {
    // Normalise -0.0 so it collides with +0.0.
    const detail::XyKey key{p.x == 0.0 ? 0.0 : p.x, p.y == 0.0 ? 0.0 : p.y};
    auto [it, inserted] = seen.emplace(key, out.cloud.points.size());
    if (inserted) {
      out.cloud.points.push_back(p);
    } else {
      ++out.duplicates_removed;
      auto& kept = out.cloud.points[it->second];
      kept.z = std::max(kept.z, p.z);
    }
  }
  return out;
}

inline LoadedCloud parse_points(std::istream& in, PointFormat format,
                                const std::string& source = "<stream>") {
  std::vector<Point3> pts;
  std::string line;
  std::size_t line_no = 0;
  std::array<int, 3> cols{0, 1, 2};
  std::size_t ncols = 3;
  bool header_done = format == PointFormat::Xyz;

  auto fail = [&](const std::string& what) {
    throw DataError(source + ":" + std::to_string(line_no) + ": " + what);
  };

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv(line);
    if (!sv.empty() && sv.back() == '\r') sv.remove_suffix(1);
    if (sv.find_first_not_of(" \t") == std::string_view::npos) continue;
    if (format == PointFormat::Xyz && sv.front() == '#') continue;

    if (!header_done) {
      auto names = detail::split(sv, ',');
      cols = {-1, -1, -1};
      for (std::size_t i = 0; i < names.size(); ++i) {
        const auto n = detail::lower(names[i]);
        if (n == "x") cols[0] = static_cast<int>(i);
        if (n == "y") cols[1] = static_cast<int>(i);
        if (n == "z") cols[2] = static_cast<int>(i);
      }
      if (cols[0] < 0 || cols[1] < 0 || cols[2] < 0) fail("CSV header must name columns x, y, z");
      ncols = names.size();
      header_done = true;
      continue;
    }

    auto toks = format == PointFormat::Xyz ? detail::split_ws(sv) : detail::split(sv, ',');
    if (format == PointFormat::Xyz && toks.size() != 3) {
      fail("expected 3 fields, got " + std::to_string(toks.size()));
    }
    if (format == PointFormat::Csv && toks.size() != ncols) {
      fail("expected " + std::to_string(ncols) + " fields, got " + std::to_string(toks.size()));
    }
    Point3 p;
    double* dst[3] = {&p.x, &p.y, &p.z};
    for (int k = 0; k < 3; ++k) {
      const auto tok = toks[static_cast<std::size_t>(cols[k])];
      if (!detail::parse_double(tok, *dst[k])) {
        fail("non-numeric or non-finite value '" + std::string(tok) + "'");
      }
    }
    pts.push_back(p);
  }
  if (pts.empty()) throw DataError(source + ": no points");
  return deduplicate(pts);
}

inline LoadedCloud load_points(const std::string& path, PointFormat format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open point file '" + path + "'");
  return parse_points(in, format, path);
}

inline PointFormat guess_format(const std::string& path) {
  const auto dot = path.rfind('.');
  if (dot != std::string::npos && detail::lower(path.substr(dot)) == ".csv") return PointFormat::Csv;
  return PointFormat::Xyz;
}

inline void write_xyz(std::ostream& out, const RawPointCloud& cloud) {
  out.precision(17);
  for (const auto& p : cloud.points) out << p.x << ' ' << p.y << ' ' << p.z << '\n';
}

// ---------------------------------------------------------------------------
// Patches and curvature

inline std::vector<Patch> subdivide(const RawPointCloud& pcd, double patch_size) {
  if (!(patch_size > 0.0)) throw UsageError("patch_size must be > 0");
  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<Index>> cells;
  for (Index i = 0; i < pcd.points.size(); ++i) {
    const auto& p = pcd.points[i];
    const auto row = static_cast<std::int64_t>(std::floor(p.y / patch_size));
    const auto col = static_cast<std::int64_t>(std::floor(p.x / patch_size));
    cells[{row, col}].push_back(i);
  }
  std::vector<Patch> patches;
  patches.reserve(cells.size());
  for (auto& [key, idx] : cells) {
    Patch patch;
    patch.row = key.first;
    patch.col = key.second;
    patch.points = std::move(idx);
    patches.push_back(std::move(patch));
  }
  return patches;
}

// Descending eigenvalues of the population covariance of the given points.
inline std::array<double, 3> covariance_eigenvalues(const std::vector<Point3>& pts) {
  if (pts.empty()) return {0.0, 0.0, 0.0};
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : pts) mean += Eigen::Vector3d(p.x, p.y, p.z);
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) {
    const Eigen::Vector3d d = Eigen::Vector3d(p.x, p.y, p.z) - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(pts.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();  // ascending
  return {std::max(ev[2], 0.0), std::max(ev[1], 0.0), std::max(ev[0], 0.0)};
}

inline double curvature_from_eigenvalues(const std::array<double, 3>& ev, CurvatureMode mode) {
  const double total = ev[0] + ev[1] + ev[2];
  if (!(total > 0.0)) return 0.0;
  const double share = mode == CurvatureMode::PaperLiteral ? ev[0] / total : ev[2] / total;
  return std::clamp(share, 0.0, 1.0);
}

// Fills patch.eigenvalues and returns the curvature. Patches with fewer than
// three points are treated as flat.
inline double estimate_patch_curvature(Patch& patch, const RawPointCloud& pcd, CurvatureMode mode) {
  if (patch.points.size() < 3) {
    patch.eigenvalues = {0.0, 0.0, 0.0};
    patch.curvature = 0.0;
    return 0.0;
  }
  std::vector<Point3> pts;
  pts.reserve(patch.points.size());
  for (auto i : patch.points) pts.push_back(pcd.points[i]);
  patch.eigenvalues = covariance_eigenvalues(pts);
  patch.curvature = curvature_from_eigenvalues(patch.eigenvalues, mode);
  return patch.curvature;
}

// ---------------------------------------------------------------------------
// Furthest point sampling

// Greedy furthest point sampling on the xy-plane. Returns indices in pick
// order; ties go to the lowest index.
inline std::vector<Index> fps(std::span<const Point3> points, std::size_t count, Index seed_index = 0) {
  if (count < 1 || count > points.size()) {
    throw UsageError("fps: count " + std::to_string(count) + " out of range [1, " +
                     std::to_string(points.size()) + "]");
  }
  if (seed_index >= points.size()) throw UsageError("fps: seed index out of range");
  const std::size_t n = points.size();
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  std::vector<Index> picked;
  picked.reserve(count);
  Index current = seed_index;
  for (std::size_t k = 0; k < count; ++k) {
    picked.push_back(current);
    min_d2[current] = -1.0;
    if (k + 1 == count) break;
    Index best = kInvalidIndex;
    double best_d2 = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (min_d2[i] < 0.0) continue;
      min_d2[i] = std::min(min_d2[i], distance_xy_sq(points[i], points[current]));
      if (min_d2[i] > best_d2) {
        best_d2 = min_d2[i];
        best = static_cast<Index>(i);
      }
    }
    current = best;
  }
  return picked;
}

namespace detail {

// Largest-remainder split of `total` proportional to `weights`.
inline std::vector<std::size_t> largest_remainder(std::span<const double> weights, std::size_t total) {
  const std::size_t n = weights.size();
  double sum = 0.0;
  for (double w : weights) sum += w;
  std::vector<std::size_t> quota(n, 0);
  if (n == 0 || !(sum > 0.0)) return quota;
  std::vector<std::pair<double, std::size_t>> remainders;
  remainders.reserve(n);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ideal = static_cast<double>(total) * weights[i] / sum;
    const auto whole = static_cast<std::size_t>(std::floor(ideal));
    quota[i] = whole;
    assigned += whole;
    remainders.emplace_back(ideal - static_cast<double>(whole), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total && k < remainders.size(); ++k, ++assigned) {
    ++quota[remainders[k].second];
  }
  return quota;
}

}  // namespace detail

// Splits `total` into integer quotas proportional to `weights`
// (largest-remainder rounding), each within [1, sizes[i]]. Whatever a
// saturated patch cannot take is handed on to the others in proportion to
// their weights, or their sizes once only zero-weight patches remain.
inline std::vector<std::size_t> allocate_quotas(std::span<const double> weights, std::size_t total,
                                                std::span<const std::size_t> sizes) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> quota(n, 0);
  std::vector<std::uint8_t> full(n, 0);
  std::size_t left = total;
  while (left > 0) {
    std::vector<std::size_t> open;
    std::vector<double> w;
    double wsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (full[i]) continue;
      open.push_back(i);
      w.push_back(weights[i]);
      wsum += weights[i];
    }
    if (open.empty()) break;
    if (!(wsum > 0.0)) {
      for (std::size_t k = 0; k < open.size(); ++k) w[k] = static_cast<double>(sizes[open[k]] - quota[open[k]]);
    }
    const auto share = detail::largest_remainder(w, left);
    bool saturated = false;
    std::size_t given = 0;
    for (std::size_t k = 0; k < open.size(); ++k) {
      const auto i = open[k];
      const auto room = sizes[i] - quota[i];
      const auto take = std::min(room, share[k]);
      quota[i] += take;
      given += take;
      if (quota[i] == sizes[i]) {
        full[i] = 1;
        if (share[k] > room) saturated = true;
      }
    }
    left -= given;
    if (!saturated) break;
  }
  for (std::size_t i = 0; i < n; ++i) quota[i] = std::clamp<std::size_t>(quota[i], 1, sizes[i]);
  return quota;
}

struct PfpsResult {
  RawPointCloud cloud;
  std::vector<Patch> patches;
  std::vector<std::size_t> quotas;
};

inline PfpsResult pfps_detailed(const RawPointCloud& pcd, const DownsampleConfig& cfg) {
  cfg.validate();
  const auto target = static_cast<std::size_t>(std::llround(cfg.keep_ratio * static_cast<double>(pcd.size())));
  if (target == 0) throw UsageError("keep_ratio too small");

  PfpsResult res;
  res.patches = subdivide(pcd, cfg.patch_size);
  auto& patches = res.patches;
  parallel_for(patches.size(), [&](std::size_t i) {
    estimate_patch_curvature(patches[i], pcd, cfg.curvature_mode);
  });

  double total_curv = 0.0;
  for (const auto& p : patches) total_curv += p.curvature;
  std::vector<double> weights(patches.size());
  std::vector<std::size_t> sizes(patches.size());
  for (std::size_t i = 0; i < patches.size(); ++i) {
    // Exactly flat input has no curvature signal; fall back to uniform.
    patches[i].weight = total_curv > 0.0 ? patches[i].curvature / total_curv
                                         : 1.0 / static_cast<double>(patches.size());
    weights[i] = patches[i].weight;
    sizes[i] = patches[i].points.size();
  }
  res.quotas = allocate_quotas(weights, target, sizes);

  std::vector<std::vector<Index>> chosen(patches.size());
  parallel_for(patches.size(), [&](std::size_t i) {
    std::vector<Point3> local;
    local.reserve(patches[i].points.size());
    for (auto idx : patches[i].points) local.push_back(pcd.points[idx]);
    for (auto li : fps(local, res.quotas[i], 0)) chosen[i].push_back(patches[i].points[li]);
  });
  for (const auto& c : chosen) {
    for (auto idx : c) res.cloud.points.push_back(pcd.points[idx]);
  }
  return res;
}

inline RawPointCloud pfps(const RawPointCloud& pcd, const DownsampleConfig& cfg) {
  return pfps_detailed(pcd, cfg).cloud;
}

inline RawPointCloud baseline_sample(const RawPointCloud& pcd, const DownsampleConfig& cfg) {
  cfg.validate();
  if (pcd.empty()) throw DataError("empty point cloud");
  const auto target = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(cfg.keep_ratio * static_cast<double>(pcd.size()))));
  RawPointCloud out;
  switch (cfg.sampler) {
    case Sampler::Random: {
      std::vector<Index> idx(pcd.size());
      std::iota(idx.begin(), idx.end(), Index{0});
      Rng rng(cfg.rng_seed);
      for (std::size_t k = 0; k < target; ++k) {
        const auto j = k + rng.below(idx.size() - k);
        std::swap(idx[k], idx[j]);
      }
      idx.resize(target);
      std::sort(idx.begin(), idx.end());
      for (auto i : idx) out.points.push_back(pcd.points[i]);
      break;
    }
    case Sampler::Voxel: {
      for (const auto& patch : subdivide(pcd, cfg.patch_size)) {
        double cx = 0.0, cy = 0.0, cz = 0.0;
        for (auto i : patch.points) {
          cx += pcd.points[i].x;
          cy += pcd.points[i].y;
          cz += pcd.points[i].z;
        }
        const double n = static_cast<double>(patch.points.size());
        const Point3 c{cx / n, cy / n, cz / n};
        Index best = patch.points.front();
        double best_d = std::numeric_limits<double>::infinity();
        for (auto i : patch.points) {
          const auto& p = pcd.points[i];
          const double d = (p.x - c.x) * (p.x - c.x) + (p.y - c.y) * (p.y - c.y) + (p.z - c.z) * (p.z - c.z);
          if (d < best_d) {
            best_d = d;
            best = i;
          }
        }
        out.points.push_back(pcd.points[best]);
      }
      break;
    }
    case Sampler::Fps: {
      for (auto i : fps(pcd.points, target, 0)) out.points.push_back(pcd.points[i]);
      break;
    }
    case Sampler::Pfps:
      throw UsageError("baseline_sample: PFPS is not a baseline sampler");
  }
  return out;
}

inline RawPointCloud downsample(const RawPointCloud& pcd, const DownsampleConfig& cfg) {
  return cfg.sampler == Sampler::Pfps ? pfps(pcd, cfg) : baseline_sample(pcd, cfg);
}

}  // namespace tinscale
