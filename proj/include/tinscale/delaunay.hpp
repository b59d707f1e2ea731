#pragma once

// Incremental Delaunay triangulation (Bowyer-Watson with ghost triangles for
// the unbounded face) over the xy-plane.

#include <algorithm>
#include <array>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "tinscale/core.hpp"
#include "tinscale/predicates.hpp"

namespace tinscale {

using Triangle = std::array<Index, 3>;

namespace detail {

inline std::uint64_t hilbert_index(std::uint32_t x, std::uint32_t y, int order) {
  std::uint64_t d = 0;
  for (std::uint32_t s = 1u << (order - 1); s > 0; s >>= 1) {
    const std::uint32_t rx = (x & s) ? 1u : 0u;
    const std::uint32_t ry = (y & s) ? 1u : 0u;
    d += static_cast<std::uint64_t>(s) * s * ((3u * rx) ^ ry);
    if (ry == 0) {
      if (rx == 1) {
        x = s - 1 - x;
        y = s - 1 - y;
      }
      std::swap(x, y);
    }
  }
  return d;
}

class DelaunayBuilder {
 public:
  static constexpr Index kGhost = kInvalidIndex;

  explicit DelaunayBuilder(std::span<const Point3> pts) : pts_(pts), rng_(0x5EEDULL) {}

  std::vector<Triangle> run() {
    const auto order = insertion_order();
    start(order);
    for (Index v : order) {
      if (v == seed_[0] || v == seed_[1] || v == seed_[2]) continue;
      insert(v);
    }
    resolve_cocircular_ties();
    return collect();
  }

 private:
  struct Tri {
    std::array<Index, 3> v;
    std::array<Index, 3> nb;  // nb[i] lies across the edge opposite v[i]
    bool alive = true;
  };

  std::span<const Point3> pts_;
  std::vector<Tri> tris_;
  std::vector<Index> free_;
  std::array<Index, 3> seed_{kInvalidIndex, kInvalidIndex, kInvalidIndex};
  Index last_ = 0;
  Rng rng_;

  // Scratch buffers reused across insertions.
  std::vector<Index> cavity_;
  std::vector<Index> stack_;
  std::vector<std::uint32_t> mark_;
  std::uint32_t stamp_ = 0;

  int orient(Index a, Index b, Index c) const {
    return predicates::orient2d(pts_[a].x, pts_[a].y, pts_[b].x, pts_[b].y, pts_[c].x, pts_[c].y);
  }

  static bool is_ghost(const Tri& t) { return t.v[2] == kGhost; }

  std::vector<Index> insertion_order() const {
    const std::size_t n = pts_.size();
    double minx = pts_[0].x, maxx = minx, miny = pts_[0].y, maxy = miny;
    for (const auto& p : pts_) {
      minx = std::min(minx, p.x);
      maxx = std::max(maxx, p.x);
      miny = std::min(miny, p.y);
      maxy = std::max(maxy, p.y);
    }
    const double span = std::max({maxx - minx, maxy - miny, 1e-300});
    constexpr int kOrder = 16;
    const double scale = static_cast<double>((1u << kOrder) - 1) / span;
    std::vector<std::pair<std::uint64_t, Index>> keys(n);
    for (Index i = 0; i < n; ++i) {
      const auto hx = static_cast<std::uint32_t>((pts_[i].x - minx) * scale);
      const auto hy = static_cast<std::uint32_t>((pts_[i].y - miny) * scale);
      keys[i] = {hilbert_index(hx, hy, kOrder), i};
    }
    std::sort(keys.begin(), keys.end());
    std::vector<Index> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = keys[i].second;
    return order;
  }

  Index new_tri(Index a, Index b, Index c) {
    // Ghost vertex always sits in slot 2.
    if (a == kGhost) {
      std::tie(a, b, c) = std::make_tuple(b, c, a);
    } else if (b == kGhost) {
      std::tie(a, b, c) = std::make_tuple(c, a, b);
    }
    Tri t{{a, b, c}, {kInvalidIndex, kInvalidIndex, kInvalidIndex}, true};
    if (!free_.empty()) {
      const Index id = free_.back();
      free_.pop_back();
      tris_[id] = t;
      return id;
    }
    tris_.push_back(t);
    mark_.push_back(0);
    return static_cast<Index>(tris_.size() - 1);
  }

  void start(const std::vector<Index>& order) {
    // First three non-collinear points in insertion order.
    const Index a = order[0];
    Index b = kInvalidIndex;
    for (std::size_t i = 1; i < order.size(); ++i) {
      if (pts_[order[i]].x != pts_[a].x || pts_[order[i]].y != pts_[a].y) {
        b = order[i];
        break;
      }
    }
    Index c = kInvalidIndex;
    if (b != kInvalidIndex) {
      for (std::size_t i = 1; i < order.size(); ++i) {
        if (order[i] != b && orient(a, b, order[i]) != 0) {
          c = order[i];
          break;
        }
      }
    }
    if (c == kInvalidIndex) throw DataError("delaunay: all points are collinear");
    if (orient(a, b, c) < 0) std::swap(b, c);
    seed_ = {a, b, c};

    const Index t0 = new_tri(a, b, c);
    const Index g_ab = new_tri(b, a, kGhost);
    const Index g_bc = new_tri(c, b, kGhost);
    const Index g_ca = new_tri(a, c, kGhost);
    tris_[t0].nb = {g_bc, g_ca, g_ab};
    // ghost (u, v, inf): nb[0] across (v, inf), nb[1] across (inf, u), nb[2] real side.
    tris_[g_ab].nb = {g_ca, g_bc, t0};
    tris_[g_bc].nb = {g_ab, g_ca, t0};
    tris_[g_ca].nb = {g_bc, g_ab, t0};
    last_ = t0;
  }

  bool in_conflict(Index ti, Index p) const {
    const Tri& t = tris_[ti];
    const auto& q = pts_[p];
    if (is_ghost(t)) {
      const auto& u = pts_[t.v[0]];
      const auto& v = pts_[t.v[1]];
      const int o = predicates::orient2d(u.x, u.y, v.x, v.y, q.x, q.y);
      if (o > 0) return true;
      if (o < 0) return false;
      // Collinear with the hull edge: conflict only strictly inside the segment.
      const double dot = (q.x - u.x) * (v.x - u.x) + (q.y - u.y) * (v.y - u.y);
      const double len = (v.x - u.x) * (v.x - u.x) + (v.y - u.y) * (v.y - u.y);
      return dot > 0.0 && dot < len;
    }
    const auto& a = pts_[t.v[0]];
    const auto& b = pts_[t.v[1]];
    const auto& c = pts_[t.v[2]];
    return predicates::incircle(a.x, a.y, b.x, b.y, c.x, c.y, q.x, q.y) > 0;
  }

  // Visibility walk towards p; returns a triangle in conflict with p.
  Index locate(Index p) {
    Index cur = last_;
    if (!tris_[cur].alive || is_ghost(tris_[cur])) {
      for (Index i = 0; i < tris_.size(); ++i) {
        if (tris_[i].alive && !is_ghost(tris_[i])) {
          cur = i;
          break;
        }
      }
    }
    for (std::size_t steps = 0;; ++steps) {
      const Tri& t = tris_[cur];
      const int offset = static_cast<int>(rng_.below(3));
      bool moved = false;
      for (int k = 0; k < 3; ++k) {
        const int i = (k + offset) % 3;
        const Index a = t.v[(i + 1) % 3];
        const Index b = t.v[(i + 2) % 3];
        if (orient(a, b, p) < 0) {
          cur = t.nb[i];
          moved = true;
          break;
        }
      }
      if (!moved) return cur;
      if (is_ghost(tris_[cur])) return cur;
      if (steps > 4 * tris_.size() + 16) {
        throw InvariantError("delaunay: point location did not terminate");
      }
    }
  }

  void insert(Index p) {
    const Index start_tri = locate(p);
    if (!in_conflict(start_tri, p)) {
      throw DataError("delaunay: duplicate site at index " + std::to_string(p));
    }
    ++stamp_;
    cavity_.clear();
    stack_.clear();
    stack_.push_back(start_tri);
    mark_[start_tri] = stamp_;
    while (!stack_.empty()) {
      const Index ti = stack_.back();
      stack_.pop_back();
      cavity_.push_back(ti);
      for (Index nb : tris_[ti].nb) {
        if (mark_[nb] == stamp_) continue;
        if (in_conflict(nb, p)) {
          mark_[nb] = stamp_;
          stack_.push_back(nb);
        }
      }
    }

    // Boundary edges of the cavity, each as (from, to, outside triangle).
    struct Rim {
      Index from, to, outside, created;
    };
    std::vector<Rim> rim;
    for (Index ti : cavity_) {
      const Tri& t = tris_[ti];
      for (int i = 0; i < 3; ++i) {
        const Index nb = t.nb[i];
        if (mark_[nb] == stamp_) continue;
        rim.push_back({t.v[(i + 1) % 3], t.v[(i + 2) % 3], nb, kInvalidIndex});
      }
    }
    for (Index ti : cavity_) {
      tris_[ti].alive = false;
      free_.push_back(ti);
    }
    for (auto& r : rim) {
      r.created = new_tri(r.from, r.to, p);
      // Outer neighbour now points at the new triangle.
      Tri& out = tris_[r.outside];
      for (int i = 0; i < 3; ++i) {
        const Index a = out.v[(i + 1) % 3];
        const Index b = out.v[(i + 2) % 3];
        if (a == r.to && b == r.from) out.nb[i] = r.created;
      }
    }
    auto slot_of = [&](const Tri& t, Index v) {
      for (int i = 0; i < 3; ++i) {
        if (t.v[i] == v) return i;
      }
      throw InvariantError("delaunay: vertex missing from triangle");
    };
    for (const auto& r : rim) {
      Tri& t = tris_[r.created];
      t.nb[slot_of(t, p)] = r.outside;
      for (const auto& s : rim) {
        if (s.from == r.to) t.nb[slot_of(t, r.from)] = s.created;  // across (to, p)
        if (s.to == r.from) t.nb[slot_of(t, r.to)] = s.created;    // across (p, from)
      }
      mark_[r.created] = 0;
      if (!is_ghost(t)) last_ = r.created;
    }
  }

  // Among cocircular quadrilaterals prefer the diagonal whose sorted index
  // pair is lexicographically smallest.
  void resolve_cocircular_ties() {
    auto key = [](Index a, Index b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
    std::vector<std::pair<Index, int>> work;
    for (Index ti = 0; ti < tris_.size(); ++ti) {
      if (!tris_[ti].alive || is_ghost(tris_[ti])) continue;
      for (int i = 0; i < 3; ++i) work.emplace_back(ti, i);
    }
    while (!work.empty()) {
      auto [ti, i] = work.back();
      work.pop_back();
      Tri& t = tris_[ti];
      if (!t.alive || is_ghost(t)) continue;
      const Index ui = t.nb[i];
      Tri& u = tris_[ui];
      if (is_ghost(u)) continue;
      const Index c = t.v[i], a = t.v[(i + 1) % 3], b = t.v[(i + 2) % 3];
      int j = 0;
      while (u.nb[j] != ti) ++j;
      const Index d = u.v[j];
      if (!(key(c, d) < key(a, b))) continue;
      const auto& P = pts_;
      if (predicates::incircle(P[c].x, P[c].y, P[a].x, P[a].y, P[b].x, P[b].y, P[d].x, P[d].y) != 0) {
        continue;
      }
      const Index n_bc = t.nb[(i + 1) % 3];
      const Index n_ca = t.nb[(i + 2) % 3];
      const Index n_ad = u.nb[(j + 1) % 3];
      const Index n_db = u.nb[(j + 2) % 3];
      t.v = {c, a, d};
      t.nb = {n_ad, ui, n_ca};
      u.v = {d, b, c};
      u.nb = {n_bc, ti, n_db};
      for (int k = 0; k < 3; ++k) {
        if (tris_[n_ad].nb[k] == ui) tris_[n_ad].nb[k] = ti;
        if (tris_[n_bc].nb[k] == ti) tris_[n_bc].nb[k] = ui;
      }
      for (int k = 0; k < 3; ++k) {
        work.emplace_back(ti, k);
        work.emplace_back(ui, k);
      }
    }
  }

  std::vector<Triangle> collect() const {
    std::vector<Triangle> out;
    for (const auto& t : tris_) {
      if (!t.alive || is_ghost(t)) continue;
      Triangle tri = t.v;
      std::rotate(tri.begin(), std::min_element(tri.begin(), tri.end()), tri.end());
      out.push_back(tri);
    }
    std::sort(out.begin(), out.end());
    return out;
  }
};

}  // namespace detail

// Triangles of the Delaunay triangulation of the points' xy-projection,
// counter-clockwise, indexing the input. Cocircular ties are resolved towards
// the diagonal with the lexicographically smallest sorted index pair.
inline std::vector<Triangle> delaunay_triangles(std::span<const Point3> pts) {
  if (pts.size() < 3) throw DataError("delaunay: need at least 3 points");
  for (const auto& p : pts) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DataError("delaunay: non-finite coordinate");
  }
  {
    std::vector<std::pair<double, double>> xy(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) xy[i] = {pts[i].x, pts[i].y};
    std::sort(xy.begin(), xy.end());
    if (std::adjacent_find(xy.begin(), xy.end()) != xy.end()) {
      throw DataError("delaunay: duplicate (x, y) sites");
    }
  }
  return detail::DelaunayBuilder(pts).run();
}

}  // namespace tinscale
