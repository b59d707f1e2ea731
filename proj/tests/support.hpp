#pragma once

// Test-only helpers: random meshes and a brute-force critical point
// classifier that works from the triangle list directly (independent of the
// ring construction in the library).

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <vector>

#include "tinscale/tinscale.hpp"

namespace testsupport {

using namespace tinscale;

inline Tin random_tin(std::size_t n, std::uint64_t seed, double extent = 100.0) {
  Rng rng(seed);
  RawPointCloud cloud;
  for (std::size_t k = 0; k < n; ++k) cloud.points.push_back({rng.uniform(0, extent), rng.uniform(0, extent), 0.0});
  return delaunay_triangulate(cloud);
}

inline std::vector<double> random_values(std::size_t n, Rng& rng) {
  std::vector<double> z(n);
  for (auto& v : z) v = rng.uniform(0.0, 10.0);
  return z;
}

// Scale space whose layers are unrelated random fields.
inline ScaleSpace random_scale_space(std::size_t n, int layers, std::uint64_t seed) {
  Rng rng(seed);
  ScaleSpace ss;
  for (int i = 0; i <= layers; ++i) {
    ss.layers.push_back(random_values(n, rng));
    ss.layer_variances.push_back(i);
    ss.iterations.push_back(0);
  }
  return ss;
}

struct LinkOracle {
  // Link of each real vertex as local vertex ids plus local edges. Virtual
  // cap vertices are numbered V + loop and sit below everything.
  std::size_t num_real = 0;
  std::vector<std::vector<Index>> link_vertices;
  std::vector<std::vector<std::pair<int, int>>> link_edges;

  explicit LinkOracle(const Tin& tin) {
    num_real = tin.num_vertices();
    std::vector<std::vector<std::pair<Index, Index>>> link(num_real);
    // Boundary edges: edges used by exactly one triangle.
    std::map<std::pair<Index, Index>, int> use;
    for (const auto& t : tin.triangles()) {
      for (int k = 0; k < 3; ++k) {
        const Index a = t[k], b = t[(k + 1) % 3], c = t[(k + 2) % 3];
        link[a].push_back({b, c});
        ++use[{std::min(a, b), std::max(a, b)}];
      }
    }
    // Boundary loops via union-find over boundary edges.
    std::vector<Index> parent(num_real);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](Index x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    std::vector<std::pair<Index, Index>> bedges;
    for (const auto& [e, c] : use) {
      if (c == 1) {
        bedges.push_back(e);
        parent[find(e.first)] = find(e.second);
      }
    }
    std::map<Index, Index> loop_id;
    for (const auto& e : bedges) loop_id.emplace(find(e.first), 0);
    Index next = 0;
    for (auto& [root, id] : loop_id) id = next++;
    for (const auto& [a, b] : bedges) {
      const Index cap = static_cast<Index>(num_real + loop_id[find(a)]);
      link[a].push_back({b, cap});
      link[b].push_back({a, cap});
    }
    link_vertices.resize(num_real);
    link_edges.resize(num_real);
    for (Index v = 0; v < num_real; ++v) {
      std::set<Index> s;
      for (auto [p, q] : link[v]) {
        s.insert(p);
        s.insert(q);
      }
      auto& lv = link_vertices[v];
      lv.assign(s.begin(), s.end());
      auto local = [&](Index u) { return static_cast<int>(std::lower_bound(lv.begin(), lv.end(), u) - lv.begin()); };
      for (auto [p, q] : link[v]) link_edges[v].push_back({local(p), local(q)});
    }
  }

  bool above(std::span<const double> z, Index a, Index b) const {
    const bool va = a >= num_real, vb = b >= num_real;
    if (va || vb) return va != vb ? vb : a > b;
    return tinscale::above(z[a], a, z[b], b);
  }

  // Components of the lower / upper link subgraphs.
  CriticalType classify(std::span<const double> z, Index v) const {
    const auto& lv = link_vertices[v];
    const int n = static_cast<int>(lv.size());
    std::vector<int> parent(n);
    std::vector<char> lower(n);
    for (int k = 0; k < n; ++k) {
      parent[k] = k;
      lower[k] = above(z, v, lv[k]);
    }
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (auto [p, q] : link_edges[v]) {
      if (lower[p] == lower[q]) parent[find(p)] = find(q);
    }
    int comps[2] = {0, 0};
    for (int k = 0; k < n; ++k) {
      if (find(k) == k) ++comps[lower[k] ? 0 : 1];
    }
    const int lo = comps[0], up = comps[1];
    if (lo == 0) return CriticalType::minimum();
    if (up == 0) return CriticalType::maximum();
    if (lo == 1 && up == 1) return CriticalType::regular();
    if (lo != up) return {CriticalKind::Regular, -1};
    return CriticalType::saddle(lo - 1);
  }
};

// Replays the tracker's type changes against the oracle at evenly spaced
// times inside every layer pair. Samples within `guard` of an event are
// skipped since the interpolated order is numerically ambiguous there.
struct ScanReport {
  std::size_t samples = 0;
  std::size_t skipped = 0;
  std::size_t mismatches = 0;
  std::size_t events = 0;
  std::size_t layer_mismatches = 0;  // replayed end state vs tracker state at the next layer
};

inline ScanReport delta_scan(const Tin& tin, const ScaleSpace& ss, int per_pair, double guard = 1e-9) {
  struct Change {
    double t;
    Index a, b;
    CriticalType ta, tb;
  };
  const std::size_t V = tin.num_vertices();
  const int L = ss.num_layers();
  std::vector<std::vector<CriticalType>> snapshot(L + 1, std::vector<CriticalType>(V));
  std::vector<std::vector<Change>> changes(L);
  ScaleSpaceTracker tracker(tin, ss);
  tracker.on_layer([&](int layer, const ScaleSpaceTracker& tr) {
    for (Index v = 0; v < V; ++v) snapshot[layer][v] = tr.type(v);
  });
  tracker.on_event([&](const EventContext& ctx) {
    changes[ctx.event.layer].push_back({ctx.event.t, ctx.event.edge.a, ctx.event.edge.b, ctx.after.first, ctx.after.second});
  });
  tracker.run();

  const LinkOracle oracle(tin);
  ScanReport rep;
  std::vector<double> z(V);
  for (int i = 0; i < L; ++i) {
    auto types = snapshot[i];
    const auto& ev = changes[i];
    rep.events += ev.size();
    const auto& za = ss.layer(i);
    const auto& zb = ss.layer(i + 1);
    std::size_t p = 0;
    for (int k = 0; k < per_pair; ++k) {
      const double delta = static_cast<double>(k) / per_pair;
      const double t = i + delta;
      while (p < ev.size() && ev[p].t < t) {
        types[ev[p].a] = ev[p].ta;
        types[ev[p].b] = ev[p].tb;
        ++p;
      }
      ++rep.samples;
      const bool near = (p < ev.size() && ev[p].t - t < guard) || (p > 0 && t - ev[p - 1].t < guard);
      if (near) {
        ++rep.skipped;
        continue;
      }
      for (std::size_t v = 0; v < V; ++v) z[v] = delta * zb[v] + (1.0 - delta) * za[v];
      for (Index v = 0; v < V; ++v) {
        if (oracle.classify(z, v) != types[v]) ++rep.mismatches;
      }
    }
    for (; p < ev.size(); ++p) {
      types[ev[p].a] = ev[p].ta;
      types[ev[p].b] = ev[p].tb;
    }
    if (types != snapshot[i + 1]) ++rep.layer_mismatches;
  }
  // Last layer itself.
  for (Index v = 0; v < V; ++v) {
    if (oracle.classify(ss.layer(L), v) != snapshot[L][v]) ++rep.mismatches;
  }
  return rep;
}

}  // namespace testsupport
