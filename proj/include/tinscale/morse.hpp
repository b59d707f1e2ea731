#pragma once

// Piecewise-linear critical point classification on a TIN.
//
// A vertex's signature is the cyclic sequence of comparisons "center above
// neighbour" taken around its ring. Runs of `false` are higher components,
// runs of `true` are lower components:
//   k_higher == 0          -> maximum
//   k_lower  == 0          -> minimum
//   k_higher == k_lower==1 -> regular
//   k_higher == k_lower==k+1 -> saddle of multiplicity k
//
// Elevation ties are broken by symbolic perturbation: a is above b iff
// (z[a], a) > (z[b], b).
//
// Boundary vertices are classified on a virtually closed surface. Every
// boundary loop is capped by a virtual vertex lying below everything, fanned
// to each vertex of the loop. The capped surface of each connected component
// is a sphere, so n_max + n_min - n_saddle == 2 holds per component, with the
// virtual vertices counted as (synthetic) minima.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tinscale/core.hpp"
#include "tinscale/tin.hpp"

namespace tinscale {

enum class CriticalKind : std::uint8_t { Regular, Maximum, Minimum, Saddle, KFoldSaddle };

struct CriticalType {
  CriticalKind kind = CriticalKind::Regular;
  int multiplicity = 1;  // k for a k-fold saddle, 1 otherwise

  static CriticalType regular() { return {CriticalKind::Regular, 1}; }
  static CriticalType maximum() { return {CriticalKind::Maximum, 1}; }
  static CriticalType minimum() { return {CriticalKind::Minimum, 1}; }
  static CriticalType saddle(int k) {
    return {k >= 2 ? CriticalKind::KFoldSaddle : CriticalKind::Saddle, k};
  }

  bool is_saddle() const { return kind == CriticalKind::Saddle || kind == CriticalKind::KFoldSaddle; }
  bool is_extremum() const { return kind == CriticalKind::Maximum || kind == CriticalKind::Minimum; }
  int saddles() const { return is_saddle() ? multiplicity : 0; }
  // Poincare-Hopf index contribution.
  int index() const { return is_extremum() ? 1 : -saddles(); }

  friend bool operator==(const CriticalType&, const CriticalType&) = default;
};

inline std::string to_string(CriticalType t) {
  switch (t.kind) {
    case CriticalKind::Regular: return "REGULAR";
    case CriticalKind::Maximum: return "MAXIMUM";
    case CriticalKind::Minimum: return "MINIMUM";
    case CriticalKind::Saddle: return "SADDLE";
    case CriticalKind::KFoldSaddle: return std::to_string(t.multiplicity) + "-FOLD_SADDLE";
  }
  return "?";
}

// Symbolic perturbation: strict total order on (value, index).
inline bool above(double za, Index a, double zb, Index b) {
  return za > zb || (za == zb && a > b);
}

struct VertexSignature {
  std::vector<bool> bits;  // bits[i] == center above neighbour i
  int k_higher = 0;
  int k_lower = 0;
};

// Counts cyclic runs of false (higher) and true (lower) bits.
inline VertexSignature make_signature(std::vector<bool> bits) {
  VertexSignature sig;
  const std::size_t m = bits.size();
  int changes = 0;
  std::size_t n_true = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (bits[i]) ++n_true;
    if (bits[i] != bits[(i + 1) % m]) ++changes;
  }
  if (changes == 0) {
    sig.k_lower = n_true > 0 ? 1 : 0;
    sig.k_higher = n_true < m ? 1 : 0;
  } else {
    sig.k_lower = sig.k_higher = changes / 2;
  }
  sig.bits = std::move(bits);
  return sig;
}

inline CriticalType classify_components(int k_higher, int k_lower) {
  if (k_higher == 0) return CriticalType::maximum();
  if (k_lower == 0) return CriticalType::minimum();
  TINSCALE_CHECK(k_higher == k_lower, "asymmetric component counts on a cyclic ring");
  if (k_higher == 1) return CriticalType::regular();
  return CriticalType::saddle(k_higher - 1);
}

// `sig` must come from the (virtually closed) ring, see vertex_signature.
inline CriticalType classify_vertex(const VertexSignature& sig) {
  return classify_components(sig.k_higher, sig.k_lower);
}

// Signature on the virtually closed ring: a boundary vertex gets one extra
// trailing `true` for the virtual vertex filling its open side.
inline VertexSignature vertex_signature(const Tin& tin, std::span<const double> z, Index v) {
  std::vector<bool> bits;
  const auto nb = tin.neighbors(v);
  bits.reserve(nb.size() + 1);
  for (Index u : nb) bits.push_back(above(z[v], v, z[u], u));
  if (tin.is_boundary(v)) bits.push_back(true);
  return make_signature(std::move(bits));
}

// ---------------------------------------------------------------------------

// The TIN plus one virtual vertex per boundary loop. Real vertices keep
// their indices; virtual vertex for loop c has index num_real() + c.
class ClosedMesh {
 public:
  static ClosedMesh close(const Tin& tin) {
    ClosedMesh m;
    m.num_real_ = tin.num_vertices();
    const auto& loops = tin.boundary_cycles();
    m.num_total_ = m.num_real_ + loops.size();
    for (Index v = 0; v < m.num_real_; ++v) {
      if (tin.neighbors(v).empty()) throw DataError("mesh has isolated vertex " + std::to_string(v));
    }
    std::vector<Index> loop_of(m.num_real_, kInvalidIndex);
    for (Index c = 0; c < loops.size(); ++c) {
      for (Index v : loops[c]) loop_of[v] = c;
    }

    m.offsets_.assign(m.num_total_ + 1, 0);
    for (Index v = 0; v < m.num_real_; ++v) {
      m.offsets_[v + 1] = tin.neighbors(v).size() + (tin.is_boundary(v) ? 1 : 0);
    }
    for (Index c = 0; c < loops.size(); ++c) m.offsets_[m.num_real_ + c + 1] = loops[c].size();
    for (std::size_t i = 0; i < m.num_total_; ++i) m.offsets_[i + 1] += m.offsets_[i];
    m.ring_.resize(m.offsets_.back());

    m.edges_ = tin.edges();
    m.num_real_edges_ = m.edges_.size();
    for (Index c = 0; c < loops.size(); ++c) {
      const auto hub = static_cast<Index>(m.num_real_ + c);
      for (Index v : loops[c]) m.edges_.push_back({v, hub});
    }
    m.ring_edge_.resize(m.ring_.size());
    for (Index v = 0; v < m.num_real_; ++v) {
      auto pos = m.offsets_[v];
      const auto nb = tin.neighbors(v);
      const auto ne = tin.ring_edges(v);
      for (std::size_t k = 0; k < nb.size(); ++k, ++pos) {
        m.ring_[pos] = nb[k];
        m.ring_edge_[pos] = ne[k];
      }
      if (tin.is_boundary(v)) {
        m.ring_[pos] = static_cast<Index>(m.num_real_ + loop_of[v]);
        m.ring_edge_[pos] = kInvalidIndex;  // patched below
      }
    }
    {
      // Virtual edge ids follow the real ones, loop by loop.
      auto next = static_cast<Index>(m.num_real_edges_);
      for (Index c = 0; c < loops.size(); ++c) {
        const auto hub = static_cast<Index>(m.num_real_ + c);
        auto pos = m.offsets_[hub];
        for (Index v : loops[c]) {
          m.ring_[pos] = v;
          m.ring_edge_[pos] = next;
          m.ring_edge_[m.offsets_[v + 1] - 1] = next;
          ++pos;
          ++next;
        }
      }
    }

    m.component_.resize(m.num_total_);
    for (Index v = 0; v < m.num_real_; ++v) m.component_[v] = tin.component(v);
    for (Index c = 0; c < loops.size(); ++c) m.component_[m.num_real_ + c] = tin.component(loops[c].front());
    m.num_components_ = tin.num_components();
    return m;
  }

  std::size_t num_real() const { return num_real_; }
  std::size_t num_total() const { return num_total_; }
  std::size_t num_components() const { return num_components_; }
  bool is_virtual(Index v) const { return v >= num_real_; }
  Index component(Index v) const { return component_[v]; }

  // Edges [0, num_real_edges()) are the TIN edges (same ids); the rest
  // connect a boundary vertex (a) to its virtual vertex (b).
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t num_real_edges() const { return num_real_edges_; }
  bool is_virtual_edge(Index e) const { return e >= num_real_edges_; }

  std::span<const Index> ring(Index v) const {
    return {ring_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
  }
  std::span<const Index> ring_edges(Index v) const {
    return {ring_edge_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
  }

  // Perturbed order with virtual vertices below every real vertex.
  bool above(std::span<const double> z, Index a, Index b) const {
    const bool va = is_virtual(a), vb = is_virtual(b);
    if (va || vb) return va != vb ? vb : a > b;
    return tinscale::above(z[a], a, z[b], b);
  }

  VertexSignature signature(std::span<const double> z, Index v) const {
    std::vector<bool> bits;
    bits.reserve(ring(v).size());
    for (Index u : ring(v)) bits.push_back(above(z, v, u));
    return make_signature(std::move(bits));
  }

  CriticalType classify(std::span<const double> z, Index v) const {
    return classify_vertex(signature(z, v));
  }

 private:
  std::size_t num_real_ = 0;
  std::size_t num_total_ = 0;
  std::size_t num_components_ = 0;
  std::size_t num_real_edges_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<Index> ring_;
  std::vector<Index> ring_edge_;
  std::vector<Edge> edges_;
  std::vector<Index> component_;
};

// Classification from a bit function over ring positions, without
// materialising the signature.
template <class AboveFn>
CriticalType classify_ring(std::size_t m, AboveFn&& center_above) {
  int changes = 0;
  bool any_true = false, any_false = false;
  bool first = false, prev = false;
  for (std::size_t i = 0; i < m; ++i) {
    const bool b = center_above(i);
    if (i == 0) {
      first = b;
    } else if (b != prev) {
      ++changes;
    }
    (b ? any_true : any_false) = true;
    prev = b;
  }
  if (m > 0 && prev != first) ++changes;
  if (!any_false) return CriticalType::maximum();
  if (!any_true) return CriticalType::minimum();
  return classify_components(changes / 2, changes / 2);
}

struct EulerCount {
  long n_max = 0;
  long n_min = 0;      // includes the virtual minima
  long n_saddle = 0;   // weighted by multiplicity

  long alternating() const { return n_max + n_min - n_saddle; }

  void add(CriticalType t) {
    if (t.kind == CriticalKind::Maximum) ++n_max;
    if (t.kind == CriticalKind::Minimum) ++n_min;
    n_saddle += t.saddles();
  }
};

struct EulerReport {
  EulerCount total;
  std::vector<EulerCount> per_component;
};

inline EulerReport euler_count(const ClosedMesh& mesh, std::span<const double> z) {
  EulerReport rep;
  rep.per_component.resize(mesh.num_components());
  for (Index v = 0; v < mesh.num_total(); ++v) {
    const auto t = mesh.classify(z, v);
    rep.total.add(t);
    rep.per_component[mesh.component(v)].add(t);
  }
  return rep;
}

inline EulerReport euler_count(const Tin& tin, std::span<const double> z) {
  return euler_count(ClosedMesh::close(tin), z);
}

inline std::vector<CriticalType> classify_all(const ClosedMesh& mesh, std::span<const double> z) {
  std::vector<CriticalType> out(mesh.num_total());
  parallel_for(out.size(), [&](std::size_t v) { out[v] = mesh.classify(z, static_cast<Index>(v)); });
  return out;
}

}  // namespace tinscale
