#pragma once

// Triangulated irregular network: vertices, CCW triangles and per-vertex
// clockwise neighbour rings, plus alpha-shape filtering and the ASCII TIN
// file format.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tinscale/core.hpp"
#include "tinscale/delaunay.hpp"
#include "tinscale/pointcloud.hpp"
#include "tinscale/predicates.hpp"

namespace tinscale {

struct Edge {
  Index a;  // a < b
  Index b;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

class Tin {
 public:
  Tin() = default;

  // Builds adjacency from CCW (or CW, which is corrected) triangles. The
  // triangle set must be an edge-manifold whose vertex links are single fans.
  static Tin from_triangles(std::vector<Point3> vertices, std::vector<Triangle> triangles) {
    Tin tin;
    tin.vertices_ = std::move(vertices);
    tin.triangles_ = std::move(triangles);
    tin.build();
    return tin;
  }

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_triangles() const { return triangles_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  std::size_t num_components() const { return num_components_; }

  const std::vector<Point3>& vertices() const { return vertices_; }
  const Point3& vertex(Index v) const { return vertices_[v]; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const std::vector<Edge>& edges() const { return edges_; }

  // Clockwise neighbour ring. For boundary vertices this is an open chain.
  std::span<const Index> neighbors(Index v) const {
    return {ring_.data() + ring_offsets_[v], ring_offsets_[v + 1] - ring_offsets_[v]};
  }
  // Edge ids parallel to neighbors(v).
  std::span<const Index> ring_edges(Index v) const {
    return {ring_edge_.data() + ring_offsets_[v], ring_offsets_[v + 1] - ring_offsets_[v]};
  }

  bool is_boundary(Index v) const { return boundary_[v] != 0; }
  Index component(Index v) const { return component_[v]; }

  // Closed boundary loops, each listed along the boundary with the mesh on
  // the left. Each loop belongs to exactly one component.
  const std::vector<std::vector<Index>>& boundary_cycles() const { return boundary_cycles_; }

  std::vector<double> elevations() const {
    std::vector<double> z(vertices_.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = vertices_[i].z;
    return z;
  }

  double median_edge_length() const {
    if (edges_.empty()) return 0.0;
    std::vector<double> len(edges_.size());
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      len[i] = distance_xy(vertices_[edges_[i].a], vertices_[edges_[i].b]);
    }
    auto mid = len.begin() + static_cast<std::ptrdiff_t>(len.size() / 2);
    std::nth_element(len.begin(), mid, len.end());
    return *mid;
  }

  Index edge_index(Index a, Index b) const {
    const auto nb = neighbors(a);
    for (std::size_t k = 0; k < nb.size(); ++k) {
      if (nb[k] == b) return ring_edges(a)[k];
    }
    return kInvalidIndex;
  }

 private:
  std::vector<Point3> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<std::size_t> ring_offsets_;
  std::vector<Index> ring_;
  std::vector<Index> ring_edge_;
  std::vector<std::uint8_t> boundary_;
  std::vector<Edge> edges_;
  std::vector<Index> component_;
  std::size_t num_components_ = 0;
  std::vector<std::vector<Index>> boundary_cycles_;

  void build() {
    const std::size_t nv = vertices_.size();
    for (auto& t : triangles_) {
      for (Index v : t) {
        if (v >= nv) throw DataError("triangle references vertex " + std::to_string(v) + " out of range");
      }
      if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) throw DataError("triangle with repeated vertex");
      const auto &p = vertices_[t[0]], &q = vertices_[t[1]], &r = vertices_[t[2]];
      const int o = predicates::orient2d(p.x, p.y, q.x, q.y, r.x, r.y);
      if (o == 0) throw DataError("degenerate (collinear) triangle");
      if (o < 0) std::swap(t[1], t[2]);
    }

    // vertex -> incident triangles
    std::vector<std::size_t> toff(nv + 1, 0);
    for (const auto& t : triangles_) {
      for (Index v : t) ++toff[v + 1];
    }
    std::partial_sum(toff.begin(), toff.end(), toff.begin());
    std::vector<Index> tinc(toff.back());
    {
      auto fill = toff;
      for (Index ti = 0; ti < triangles_.size(); ++ti) {
        for (Index v : triangles_[ti]) tinc[fill[v]++] = ti;
      }
    }

    ring_offsets_.assign(nv + 1, 0);
    boundary_.assign(nv, 0);
    std::vector<std::vector<Index>> rings(nv);
    std::vector<std::pair<Index, Index>> links;  // (b, c) with (v, b, c) CCW
    for (Index v = 0; v < nv; ++v) {
      links.clear();
      for (std::size_t k = toff[v]; k < toff[v + 1]; ++k) {
        const auto& t = triangles_[tinc[k]];
        int s = 0;
        while (t[s] != v) ++s;
        links.emplace_back(t[(s + 1) % 3], t[(s + 2) % 3]);
      }
      if (links.empty()) continue;
      std::sort(links.begin(), links.end());
      for (std::size_t k = 1; k < links.size(); ++k) {
        if (links[k].first == links[k - 1].first) throw DataError("non-manifold edge at vertex " + std::to_string(v));
      }
      auto succ = [&](Index b) -> Index {
        auto it = std::lower_bound(links.begin(), links.end(), std::make_pair(b, Index{0}));
        return (it != links.end() && it->first == b) ? it->second : kInvalidIndex;
      };
      std::vector<Index> targets;
      targets.reserve(links.size());
      for (const auto& l : links) targets.push_back(l.second);
      std::sort(targets.begin(), targets.end());
      Index start = links.front().first;
      bool open = false;
      for (const auto& l : links) {
        if (!std::binary_search(targets.begin(), targets.end(), l.first)) {
          start = l.first;
          open = true;
          break;
        }
      }
      std::vector<Index> ccw;
      Index cur = start;
      while (cur != kInvalidIndex && ccw.size() <= links.size()) {
        ccw.push_back(cur);
        cur = succ(cur);
        if (cur == start) break;
      }
      const std::size_t expected = open ? links.size() + 1 : links.size();
      if (ccw.size() != expected) throw DataError("vertex " + std::to_string(v) + " has a non-manifold link");
      boundary_[v] = open ? 1 : 0;
      rings[v].assign(ccw.rbegin(), ccw.rend());
    }

    for (Index v = 0; v < nv; ++v) ring_offsets_[v + 1] = ring_offsets_[v] + rings[v].size();
    ring_.resize(ring_offsets_.back());
    ring_edge_.resize(ring_offsets_.back());
    for (Index v = 0; v < nv; ++v) std::copy(rings[v].begin(), rings[v].end(), ring_.begin() + static_cast<std::ptrdiff_t>(ring_offsets_[v]));

    edges_.clear();
    for (Index v = 0; v < nv; ++v) {
      for (Index u : neighbors(v)) {
        if (v < u) edges_.push_back({v, u});
      }
    }
    std::sort(edges_.begin(), edges_.end());
    for (Index v = 0; v < nv; ++v) {
      for (std::size_t k = ring_offsets_[v]; k < ring_offsets_[v + 1]; ++k) {
        const Edge e{std::min(v, ring_[k]), std::max(v, ring_[k])};
        ring_edge_[k] = static_cast<Index>(std::lower_bound(edges_.begin(), edges_.end(), e) - edges_.begin());
      }
    }

    // components over edges
    component_.assign(nv, kInvalidIndex);
    num_components_ = 0;
    std::vector<Index> stack;
    for (Index s = 0; s < nv; ++s) {
      if (component_[s] != kInvalidIndex || ring_offsets_[s] == ring_offsets_[s + 1]) continue;
      const auto c = static_cast<Index>(num_components_++);
      component_[s] = c;
      stack.push_back(s);
      while (!stack.empty()) {
        const Index v = stack.back();
        stack.pop_back();
        for (Index u : neighbors(v)) {
          if (component_[u] == kInvalidIndex) {
            component_[u] = c;
            stack.push_back(u);
          }
        }
      }
    }

    // Boundary loops: the clockwise chain of boundary vertex v ends at the
    // neighbour reached by the outgoing boundary edge (mesh on the left).
    boundary_cycles_.clear();
    std::vector<Index> next(nv, kInvalidIndex);
    for (Index v = 0; v < nv; ++v) {
      if (boundary_[v]) next[v] = neighbors(v).back();
    }
    std::vector<std::uint8_t> seen(nv, 0);
    for (Index v = 0; v < nv; ++v) {
      if (!boundary_[v] || seen[v]) continue;
      std::vector<Index> loop;
      Index cur = v;
      while (!seen[cur]) {
        seen[cur] = 1;
        loop.push_back(cur);
        cur = next[cur];
        if (cur == kInvalidIndex || !boundary_[cur]) throw DataError("broken boundary loop");
      }
      if (cur != v) throw DataError("boundary loops share a vertex");
      boundary_cycles_.push_back(std::move(loop));
    }
  }
};

inline double circumradius_xy(const Point3& a, const Point3& b, const Point3& c) {
  const double la = distance_xy(b, c);
  const double lb = distance_xy(a, c);
  const double lc = distance_xy(a, b);
  const double area2 = std::abs((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
  if (area2 == 0.0) return std::numeric_limits<double>::infinity();
  return la * lb * lc / (2.0 * area2);
}

// Removes triangles until every vertex link is a single fan: at a pinch
// vertex the fan with the most triangles survives (ties: smallest triangle
// index). Returns the kept triangles in their original order.
inline std::vector<Triangle> enforce_single_fans(std::size_t nv, std::vector<Triangle> tris) {
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<std::vector<Index>> inc(nv);
    for (Index ti = 0; ti < tris.size(); ++ti) {
      for (Index v : tris[ti]) inc[v].push_back(ti);
    }
    std::vector<std::uint8_t> drop(tris.size(), 0);
    for (Index v = 0; v < nv; ++v) {
      if (inc[v].size() < 2) continue;
      // Union triangles sharing an edge incident to v.
      std::map<Index, std::vector<Index>> by_nbr;
      for (Index ti : inc[v]) {
        for (Index u : tris[ti]) {
          if (u != v) by_nbr[u].push_back(ti);
        }
      }
      std::vector<Index> parent(inc[v].size());
      std::iota(parent.begin(), parent.end(), Index{0});
      auto local = [&](Index ti) {
        return static_cast<Index>(std::find(inc[v].begin(), inc[v].end(), ti) - inc[v].begin());
      };
      std::function<Index(Index)> find = [&](Index x) { return parent[x] == x ? x : parent[x] = find(parent[x]); };
      for (const auto& [u, ts] : by_nbr) {
        for (std::size_t k = 1; k < ts.size(); ++k) parent[find(local(ts[k]))] = find(local(ts[0]));
      }
      std::map<Index, std::vector<Index>> fans;
      for (Index k = 0; k < inc[v].size(); ++k) fans[find(k)].push_back(inc[v][k]);
      if (fans.size() < 2) continue;
      const std::vector<Index>* best = nullptr;
      for (const auto& [root, ts] : fans) {
        if (!best || ts.size() > best->size() ||
            (ts.size() == best->size() && *std::min_element(ts.begin(), ts.end()) <
                                              *std::min_element(best->begin(), best->end()))) {
          best = &ts;
        }
      }
      for (const auto& [root, ts] : fans) {
        if (&ts == best) continue;
        for (Index ti : ts) drop[ti] = 1;
      }
      changed = true;
      break;  // rebuild incidence after each pinch resolution
    }
    if (changed) {
      std::vector<Triangle> kept;
      for (Index ti = 0; ti < tris.size(); ++ti) {
        if (!drop[ti]) kept.push_back(tris[ti]);
      }
      tris = std::move(kept);
    }
  }
  return tris;
}

// Keeps only vertices referenced by a triangle, renumbering in order.
inline Tin compact_tin(const std::vector<Point3>& verts, const std::vector<Triangle>& tris) {
  std::vector<Index> remap(verts.size(), kInvalidIndex);
  for (const auto& t : tris) {
    for (Index v : t) remap[v] = 0;
  }
  std::vector<Point3> out_v;
  for (Index v = 0; v < verts.size(); ++v) {
    if (remap[v] == kInvalidIndex) continue;
    remap[v] = static_cast<Index>(out_v.size());
    out_v.push_back(verts[v]);
  }
  std::vector<Triangle> out_t;
  out_t.reserve(tris.size());
  for (const auto& t : tris) out_t.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
  return Tin::from_triangles(std::move(out_v), std::move(out_t));
}

inline Tin delaunay_triangulate(const RawPointCloud& points) {
  auto tris = delaunay_triangles(points.points);
  return Tin::from_triangles(points.points, std::move(tris));
}

struct AlphaShapeConfig {
  double alpha = std::numeric_limits<double>::infinity();  // meters

  void validate() const {
    if (!(alpha > 0.0)) throw UsageError("alpha must be > 0");
  }
};

// Drops triangles whose xy circumradius exceeds alpha, resolves pinch
// vertices and removes vertices left without triangles.
inline Tin alpha_shape_filter(const Tin& tin, const AlphaShapeConfig& cfg) {
  cfg.validate();
  std::vector<Triangle> kept;
  kept.reserve(tin.num_triangles());
  for (const auto& t : tin.triangles()) {
    if (circumradius_xy(tin.vertex(t[0]), tin.vertex(t[1]), tin.vertex(t[2])) <= cfg.alpha) kept.push_back(t);
  }
  kept = enforce_single_fans(tin.num_vertices(), std::move(kept));
  if (kept.empty()) throw DataError("alpha-shape filter removed every triangle (alpha too small)");
  return compact_tin(tin.vertices(), kept);
}

// ---------------------------------------------------------------------------
// ASCII TIN file: "V T", V lines "x y z", T lines "i j k" (0-based, CCW).

inline void write_tin(std::ostream& out, const Tin& tin) {
  out.precision(17);
  out << tin.num_vertices() << ' ' << tin.num_triangles() << '\n';
  for (const auto& p : tin.vertices()) out << p.x << ' ' << p.y << ' ' << p.z << '\n';
  for (const auto& t : tin.triangles()) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

inline Tin read_tin(std::istream& in, const std::string& source = "<stream>") {
  std::size_t nv = 0, nt = 0;
  if (!(in >> nv >> nt)) throw DataError(source + ": bad TIN header");
  std::vector<Point3> v(nv);
  for (auto& p : v) {
    if (!(in >> p.x >> p.y >> p.z)) throw DataError(source + ": truncated vertex list");
  }
  std::vector<Triangle> t(nt);
  for (auto& tri : t) {
    long long a, b, c;
    if (!(in >> a >> b >> c)) throw DataError(source + ": truncated triangle list");
    if (a < 0 || b < 0 || c < 0) throw DataError(source + ": negative vertex index");
    tri = {static_cast<Index>(a), static_cast<Index>(b), static_cast<Index>(c)};
  }
  return Tin::from_triangles(std::move(v), std::move(t));
}

inline Tin load_tin(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open TIN file '" + path + "'");
  return read_tin(in, path);
}

}  // namespace tinscale
