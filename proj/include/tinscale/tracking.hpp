#pragma once

// Critical point tracking through a discrete scale space.
//
// Between consecutive layers every vertex elevation is linear in time, so
// the relative order of an edge's endpoints changes at most once per layer
// pair. Such an edge flip is the only event that can change a vertex type,
// and it changes only the two endpoints. Tracking therefore reduces to
// processing the flips of each layer pair in chronological order, keeping
// one orientation bit per edge and reclassifying two vertices per event.
//
// Critical points are followed as traces. A k-fold saddle carries k simple
// saddle traces. After each flip the traces at both endpoints are reconciled
// with their new types through primitive steps (displacement, appearance of
// an extremum-saddle pair, collapse of one), which conserves
// n_max + n_min - n_saddle at every step.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "tinscale/core.hpp"
#include "tinscale/morse.hpp"
#include "tinscale/smoothing.hpp"
#include "tinscale/tin.hpp"

namespace tinscale {

struct EdgeFlipEvent {
  Edge edge;              // edge.a < edge.b
  double t = 0.0;         // timestamp in (layer, layer + 1)
  int layer = 0;
  bool a_was_above = false;  // orientation before the flip
  Index edge_index = kInvalidIndex;  // position in the edge list it was found on

  friend bool operator==(const EdgeFlipEvent&, const EdgeFlipEvent&) = default;
};

inline bool event_before(const EdgeFlipEvent& x, const EdgeFlipEvent& y) {
  if (x.t != y.t) return x.t < y.t;
  return x.edge < y.edge;
}

namespace detail {

// Fraction of the layer interval where edge (m, n) flips. Both differences
// have opposite signs at a flip, so the denominator never cancels.
inline double flip_fraction(std::span<const double> z_i, std::span<const double> z_ip1, Edge e) {
  const double d0 = z_i[e.a] - z_i[e.b];
  const double d1 = z_ip1[e.a] - z_ip1[e.b];
  if (d0 == 0.0) return 0.0;
  if (d1 == 0.0) return 1.0;
  return d0 / (d0 - d1);
}

// Exact order of two flips in one layer pair. Each vertex moves on the line
// z_i + tau * s, lifted by eps * index + eps^2 * s^2 so that index ties at
// the layers and concurrent crossings get a consistent order; the sequence
// of orientations then always comes from a total order of the vertices.
inline bool flip_precedes(std::span<const double> z_i, std::span<const double> z_ip1, const EdgeFlipEvent& x, double fx,
                          const EdgeFlipEvent& y, double fy) {
  constexpr double kFilter = 4e-15;  // well above the fraction's rounding error
  if (fx < fy - kFilter) return true;
  if (fy < fx - kFilter) return false;
  using Q = boost::multiprecision::cpp_rational;
  auto keys = [&](const EdgeFlipEvent& ev) {
    const Index u = ev.edge.a, v = ev.edge.b;
    const Q su = Q(z_ip1[u]) - Q(z_i[u]), sv = Q(z_ip1[v]) - Q(z_i[v]);
    const Q den = sv - su;
    const Q tau = (Q(z_i[u]) - Q(z_i[v])) / den;
    const Q k1 = Q(static_cast<long long>(u) - static_cast<long long>(v)) / den;
    const Q k2 = -(su + sv);
    return std::make_tuple(tau, k1, k2);
  };
  const auto kx = keys(x), ky = keys(y);
  if (kx != ky) return kx < ky;
  return x.edge < y.edge;
}

}  // namespace detail

// Flip of edge (m, n) between layer values z_i and z_ip1, if their perturbed
// order differs. The timestamp is where the linearly interpolated values
// meet; exact ties at a layer are pushed just inside the open interval.
inline std::optional<EdgeFlipEvent> edge_flip_time(std::span<const double> z_i, std::span<const double> z_ip1,
                                                   Edge edge, int i) {
  const Index m = edge.a, n = edge.b;
  const bool before = above(z_i[m], m, z_i[n], n);
  const bool after = above(z_ip1[m], m, z_ip1[n], n);
  if (before == after) return std::nullopt;
  const double lo = static_cast<double>(i);
  const double hi = static_cast<double>(i + 1);
  const double d0 = z_i[m] - z_i[n];
  const double d1 = z_ip1[m] - z_ip1[n];
  double t;
  if (d0 == 0.0) {
    t = std::nextafter(lo, hi);
  } else if (d1 == 0.0) {
    t = std::nextafter(hi, lo);
  } else {
    t = lo + (z_i[m] - z_i[n]) / (z_ip1[n] - z_i[n] + z_i[m] - z_ip1[m]);
    if (!(t > lo)) t = std::nextafter(lo, hi);
    if (!(t < hi)) t = std::nextafter(hi, lo);
  }
  return EdgeFlipEvent{edge, t, i, before};
}

// All flips of layer pair (i, i + 1) over the given edges, in processing
// order: by crossing time, simultaneous flips by the perturbed order above,
// then by edge. Timestamps are made non-decreasing along that order.
inline std::vector<EdgeFlipEvent> detect_events(std::span<const double> z_i, std::span<const double> z_ip1,
                                                std::span<const Edge> edges, int i) {
  std::vector<std::optional<EdgeFlipEvent>> found(edges.size());
  parallel_for(edges.size(), [&](std::size_t k) {
    found[k] = edge_flip_time(z_i, z_ip1, edges[k], i);
    if (found[k]) found[k]->edge_index = static_cast<Index>(k);
  });
  std::vector<EdgeFlipEvent> flips;
  for (const auto& f : found) {
    if (f) flips.push_back(*f);
  }
  // Sort small (fraction, slot) keys; the events are only touched on near ties.
  std::vector<std::pair<double, std::uint32_t>> keyed(flips.size());
  for (std::size_t k = 0; k < flips.size(); ++k) {
    keyed[k] = {detail::flip_fraction(z_i, z_ip1, flips[k].edge), static_cast<std::uint32_t>(k)};
  }
  std::sort(keyed.begin(), keyed.end(), [&](const auto& x, const auto& y) {
    return detail::flip_precedes(z_i, z_ip1, flips[x.second], x.first, flips[y.second], y.first);
  });
  std::vector<EdgeFlipEvent> events;
  events.reserve(keyed.size());
  for (const auto& [f, k] : keyed) {
    auto ev = flips[k];
    if (!events.empty() && ev.t < events.back().t) ev.t = events.back().t;
    events.push_back(ev);
  }
  return events;
}

inline std::vector<EdgeFlipEvent> detect_events(const ScaleSpace& ss, const Tin& tin, int i) {
  if (i < 0 || i >= ss.num_layers()) throw UsageError("detect_events: layer index out of range");
  return detect_events(ss.layer(i), ss.layer(i + 1), tin.edges(), i);
}

// ---------------------------------------------------------------------------
// Traces and transitions

enum class TraceKind : std::uint8_t { Maximum, Minimum, Saddle };
enum class Origin : std::uint8_t { Initial, Newborn };
enum class TransitionKind : std::uint8_t { Displacement, Appearance, Collapse, Compound };

inline const char* to_string(TraceKind k) {
  switch (k) {
    case TraceKind::Maximum: return "MAXIMUM";
    case TraceKind::Minimum: return "MINIMUM";
    case TraceKind::Saddle: return "SADDLE";
  }
  return "?";
}
inline const char* to_string(Origin o) { return o == Origin::Initial ? "INITIAL" : "NEWBORN"; }
inline const char* to_string(TransitionKind k) {
  switch (k) {
    case TransitionKind::Displacement: return "DISPLACEMENT";
    case TransitionKind::Appearance: return "APPEARANCE";
    case TransitionKind::Collapse: return "COLLAPSE";
    case TransitionKind::Compound: return "COMPOUND";
  }
  return "?";
}

struct PathStep {
  double t;
  Index from;
  Index to;
};

inline constexpr std::uint64_t kAlive = std::numeric_limits<std::uint64_t>::max();

struct CriticalPointTrace {
  Index id = 0;
  TraceKind kind = TraceKind::Maximum;
  Origin origin = Origin::Initial;
  bool synthetic = false;  // minimum sitting on a virtual boundary cap
  double birth_t = 0.0;
  std::optional<double> death_t;
  std::uint64_t death_seq = kAlive;  // global processing order of the collapse
  Index birth_vertex = 0;
  Index current_vertex = 0;
  std::vector<PathStep> path;
  std::optional<Edge> last_edge;
  double last_move_t = 0.0;
  std::optional<Index> birth_mate;
  std::optional<Index> death_mate;

  bool alive() const { return death_seq == kAlive; }
  bool is_extremum() const { return kind != TraceKind::Saddle; }
};

struct TransitionRecord {
  EdgeFlipEvent event;
  TransitionKind kind = TransitionKind::Displacement;
  std::pair<CriticalType, CriticalType> before;  // (type at edge.a, type at edge.b)
  std::pair<CriticalType, CriticalType> after;
  std::vector<Index> traces;
  bool part_of_compound = false;
};

namespace detail {

inline bool is_regular(CriticalType t) { return t.kind == CriticalKind::Regular; }
inline bool is_simple(CriticalType t) { return t.multiplicity == 1; }

}  // namespace detail

// Kind of change between endpoint types around a flip; empty when both
// endpoints keep their type. Single-critical-point moves and single
// extremum-saddle creations/annihilations are primitive; everything else
// (multiplicity changes, three or more critical points) is COMPOUND.
inline std::optional<TransitionKind> classify_transition(std::pair<CriticalType, CriticalType> before,
                                                         std::pair<CriticalType, CriticalType> after) {
  const int idx_before = before.first.index() + before.second.index();
  const int idx_after = after.first.index() + after.second.index();
  if (idx_before != idx_after) {
    throw InvariantError("transition " + to_string(before.first) + "," + to_string(before.second) + " -> " +
                         to_string(after.first) + "," + to_string(after.second) + " breaks the index balance");
  }
  if (before == after) return std::nullopt;
  const bool simple = detail::is_simple(before.first) && detail::is_simple(before.second) &&
                      detail::is_simple(after.first) && detail::is_simple(after.second);
  if (simple) {
    const auto [b0, b1] = before;
    const auto [a0, a1] = after;
    using detail::is_regular;
    // X moves across the edge.
    if (is_regular(b1) && is_regular(a0) && !is_regular(b0) && b0 == a1) return TransitionKind::Displacement;
    if (is_regular(b0) && is_regular(a1) && !is_regular(b1) && b1 == a0) return TransitionKind::Displacement;
    auto pair_ok = [](CriticalType x, CriticalType y) {
      return (x.is_extremum() && y.is_saddle()) || (x.is_saddle() && y.is_extremum());
    };
    if (is_regular(b0) && is_regular(b1) && pair_ok(a0, a1)) return TransitionKind::Appearance;
    if (is_regular(a0) && is_regular(a1) && pair_ok(b0, b1)) return TransitionKind::Collapse;
  }
  return TransitionKind::Compound;
}

// Picks the saddle most likely to travel through the flipping edge: one that
// last moved along this very edge, else the most recently moved one, else
// the lowest id.
inline Index match_velocity(std::span<const Index> candidates, std::span<const CriticalPointTrace> traces,
                            Edge flipping) {
  TINSCALE_CHECK(!candidates.empty(), "match_velocity: no candidates");
  Index best = candidates.front();
  auto rank = [&](Index id) {
    const auto& tr = traces[id];
    const bool aligned = tr.last_edge && *tr.last_edge == flipping;
    return std::make_tuple(aligned ? 1 : 0, tr.last_move_t);
  };
  for (Index id : candidates.subspan(1)) {
    const auto r = rank(id);
    const auto rb = rank(best);
    if (r > rb || (r == rb && id < best)) best = id;
  }
  return best;
}

// One step of a decomposed transition.
struct PrimitiveStep {
  TransitionKind kind = TransitionKind::Displacement;
  // Displacement: `first` moves from vertex `from` to `to`.
  // Collapse: extremum `first` and saddle `second` die.
  // Appearance: new extremum of `extremum_kind` at `to` and new saddle at
  // `from`; ids are assigned when the step is applied.
  Index first = kInvalidIndex;
  Index second = kInvalidIndex;
  Index from = kInvalidIndex;
  Index to = kInvalidIndex;
  TraceKind extremum_kind = TraceKind::Maximum;
};

// Endpoint state around a flip: types before and after, and the live traces
// sitting on the vertex before the flip.
struct EndpointState {
  Index vertex = kInvalidIndex;
  CriticalType before;
  CriticalType after;
  std::vector<Index> occupants;
};

// Splits the change at the two endpoints of a flipped edge into primitive
// steps, each moving, creating or destroying one simple saddle and at most
// one extremum. Saddle traces are chosen by match_velocity.
inline std::vector<PrimitiveStep> decompose_kfold(const std::array<EndpointState, 2>& ends,
                                                  std::span<const CriticalPointTrace> traces, Edge flipping) {
  std::vector<PrimitiveStep> steps;
  auto ext_kind = [](CriticalType t) -> std::optional<TraceKind> {
    if (t.kind == CriticalKind::Maximum) return TraceKind::Maximum;
    if (t.kind == CriticalKind::Minimum) return TraceKind::Minimum;
    return std::nullopt;
  };
  // Working saddle lists per end.
  std::array<std::vector<Index>, 2> saddles;
  std::array<std::optional<Index>, 2> extremum;
  for (int k = 0; k < 2; ++k) {
    for (Index id : ends[k].occupants) {
      if (traces[id].kind == TraceKind::Saddle) {
        saddles[k].push_back(id);
      } else {
        extremum[k] = id;
      }
    }
  }
  auto target = [&](int k) { return ends[k].after.saddles(); };
  auto surplus = [&](int k) { return static_cast<int>(saddles[k].size()) - target(k); };
  auto take_saddle = [&](int k) {
    const Index id = match_velocity(saddles[k], traces, flipping);
    saddles[k].erase(std::find(saddles[k].begin(), saddles[k].end(), id));
    return id;
  };

  std::array<bool, 2> handled{false, false};
  // Extremum displacements.
  for (int k = 0; k < 2; ++k) {
    const int o = 1 - k;
    const auto kb = ext_kind(ends[k].before), ka = ext_kind(ends[k].after);
    const auto ob = ext_kind(ends[o].before), oa = ext_kind(ends[o].after);
    if (kb && kb != ka && oa == kb && ob != oa && !handled[k] && !handled[o]) {
      TINSCALE_CHECK(extremum[k].has_value(), "extremum without trace");
      steps.push_back({TransitionKind::Displacement, *extremum[k], kInvalidIndex, ends[k].vertex, ends[o].vertex, *kb});
      handled[k] = handled[o] = true;
    }
  }
  // Extremum collapses.
  for (int k = 0; k < 2; ++k) {
    const auto kb = ext_kind(ends[k].before), ka = ext_kind(ends[k].after);
    if (!kb || kb == ka || handled[k]) continue;
    TINSCALE_CHECK(extremum[k].has_value(), "extremum without trace");
    const int o = 1 - k;
    int from;
    if (surplus(o) > 0) from = o;
    else if (surplus(k) > 0) from = k;
    else if (!saddles[o].empty()) from = o;
    else from = k;
    TINSCALE_CHECK(!saddles[from].empty(), "collapse without a saddle partner");
    const Index s = take_saddle(from);
    steps.push_back({TransitionKind::Collapse, *extremum[k], s, ends[k].vertex, ends[from].vertex, *kb});
  }
  // Extremum appearances.
  std::array<int, 2> created{0, 0};
  for (int k = 0; k < 2; ++k) {
    const auto kb = ext_kind(ends[k].before), ka = ext_kind(ends[k].after);
    if (!ka || kb == ka || handled[k]) continue;
    const int o = 1 - k;
    auto deficit = [&](int e) { return target(e) - static_cast<int>(saddles[e].size()) - created[e]; };
    int at;
    if (deficit(o) > 0) at = o;
    else if (deficit(k) > 0) at = k;
    else at = o;
    ++created[at];
    steps.push_back({TransitionKind::Appearance, kInvalidIndex, kInvalidIndex, ends[at].vertex, ends[k].vertex, *ka});
  }
  // Saddle displacements to reach the target counts.
  std::array<int, 2> arrived{0, 0};
  auto count = [&](int e) { return static_cast<int>(saddles[e].size()) + created[e] + arrived[e]; };
  for (int k = 0; k < 2; ++k) {
    const int o = 1 - k;
    while (count(k) > target(k) && count(o) < target(o)) {
      TINSCALE_CHECK(!saddles[k].empty(), "saddle displacement without a trace");
      const Index s = take_saddle(k);
      steps.push_back({TransitionKind::Displacement, s, kInvalidIndex, ends[k].vertex, ends[o].vertex, TraceKind::Saddle});
      ++arrived[o];
    }
  }
  for (int k = 0; k < 2; ++k) {
    if (count(k) != target(k)) {
      throw InvariantError("no balanced decomposition for " + to_string(ends[0].before) + "," +
                           to_string(ends[1].before) + " -> " + to_string(ends[0].after) + "," +
                           to_string(ends[1].after));
    }
  }
  return steps;
}

// ---------------------------------------------------------------------------

struct TrackingResult {
  std::vector<CriticalPointTrace> traces;
  std::vector<TransitionRecord> transitions;
  std::vector<std::size_t> events_per_layer;  // flips per layer pair
  int num_layers = 0;
  std::size_t num_real_vertices = 0;
};

class ScaleSpaceTracker;

struct EventContext {
  const EdgeFlipEvent& event;
  std::uint64_t sequence;
  std::pair<CriticalType, CriticalType> before;
  std::pair<CriticalType, CriticalType> after;
  const ScaleSpaceTracker& tracker;
};

class ScaleSpaceTracker {
 public:
  using EventObserver = std::function<void(const EventContext&)>;
  using LayerObserver = std::function<void(int layer, const ScaleSpaceTracker&)>;

  ScaleSpaceTracker(const Tin& tin, const ScaleSpace& ss)
      : tin_(tin), ss_(ss), mesh_(ClosedMesh::close(tin)) {
    if (ss.num_layers() < 1) throw UsageError("tracking needs at least two layers");
    if (ss.num_vertices() != tin.num_vertices()) throw DataError("scale space does not match the mesh");
  }

  void on_event(EventObserver fn) { event_observer_ = std::move(fn); }
  void on_layer(LayerObserver fn) { layer_observer_ = std::move(fn); }

  TrackingResult run() {
    initialise();
    if (layer_observer_) layer_observer_(0, *this);
    for (int i = 0; i < ss_.num_layers(); ++i) {
      const auto events = detect_events(ss_.layer(i), ss_.layer(i + 1), tin_.edges(), i);
      result_.events_per_layer.push_back(events.size());
      for (const auto& ev : events) process(ev);
      if (layer_observer_) layer_observer_(i + 1, *this);
    }
    result_.num_layers = ss_.num_layers();
    result_.num_real_vertices = tin_.num_vertices();
    return std::move(result_);
  }

  const ClosedMesh& mesh() const { return mesh_; }
  CriticalType type(Index v) const { return types_[v]; }
  std::span<const Index> occupants(Index v) const { return occupants_[v]; }
  const std::vector<CriticalPointTrace>& traces() const { return result_.traces; }
  long alternating(Index component) const { return tally_[component]; }

  // Type implied by the live traces on v.
  CriticalType occupancy_type(Index v) const { return type_from_traces(occupants_[v], result_.traces); }

  static CriticalType type_from_traces(std::span<const Index> ids, std::span<const CriticalPointTrace> traces) {
    int maxima = 0, minima = 0, saddles = 0;
    for (Index id : ids) {
      switch (traces[id].kind) {
        case TraceKind::Maximum: ++maxima; break;
        case TraceKind::Minimum: ++minima; break;
        case TraceKind::Saddle: ++saddles; break;
      }
    }
    if (maxima + minima + saddles == 0) return CriticalType::regular();
    if (maxima == 1 && minima + saddles == 0) return CriticalType::maximum();
    if (minima == 1 && maxima + saddles == 0) return CriticalType::minimum();
    if (saddles > 0 && maxima + minima == 0) return CriticalType::saddle(saddles);
    return {CriticalKind::Regular, -1};  // inconsistent occupancy
  }

 private:
  const Tin& tin_;
  const ScaleSpace& ss_;
  ClosedMesh mesh_;
  std::vector<std::uint8_t> up_;  // per real edge: edge.a above edge.b
  std::vector<CriticalType> types_;
  std::vector<std::vector<Index>> occupants_;
  std::vector<long> tally_;
  TrackingResult result_;
  std::uint64_t seq_ = 0;
  EventObserver event_observer_;
  LayerObserver layer_observer_;

  bool center_above(Index v, std::size_t k) const {
    const Index e = mesh_.ring_edges(v)[k];
    if (mesh_.is_virtual_edge(e)) return !mesh_.is_virtual(v);
    const bool a_up = up_[e] != 0;
    return v < mesh_.ring(v)[k] ? a_up : !a_up;
  }

  CriticalType classify(Index v) const {
    return classify_ring(mesh_.ring(v).size(), [&](std::size_t k) { return center_above(v, k); });
  }

  Index new_trace(TraceKind kind, Origin origin, double t, Index vertex) {
    CriticalPointTrace tr;
    tr.id = static_cast<Index>(result_.traces.size());
    tr.kind = kind;
    tr.origin = origin;
    tr.synthetic = mesh_.is_virtual(vertex);
    tr.birth_t = t;
    tr.birth_vertex = vertex;
    tr.current_vertex = vertex;
    tr.last_move_t = t;
    result_.traces.push_back(std::move(tr));
    occupants_[vertex].push_back(result_.traces.back().id);
    return result_.traces.back().id;
  }

  void initialise() {
    const auto& z0 = ss_.layer(0);
    up_.assign(mesh_.num_real_edges(), 0);
    for (Index e = 0; e < mesh_.num_real_edges(); ++e) {
      const auto& ed = mesh_.edges()[e];
      up_[e] = above(z0[ed.a], ed.a, z0[ed.b], ed.b) ? 1 : 0;
    }
    types_.resize(mesh_.num_total());
    occupants_.assign(mesh_.num_total(), {});
    tally_.assign(mesh_.num_components(), 0);
    for (Index v = 0; v < mesh_.num_total(); ++v) {
      const auto t = classify(v);
      types_[v] = t;
      tally_[mesh_.component(v)] += t.index();
      if (t.kind == CriticalKind::Maximum) new_trace(TraceKind::Maximum, Origin::Initial, 0.0, v);
      if (t.kind == CriticalKind::Minimum) new_trace(TraceKind::Minimum, Origin::Initial, 0.0, v);
      for (int s = 0; s < t.saddles(); ++s) new_trace(TraceKind::Saddle, Origin::Initial, 0.0, v);
    }
  }

  void remove_occupant(Index v, Index id) {
    auto& occ = occupants_[v];
    const auto it = std::find(occ.begin(), occ.end(), id);
    TINSCALE_CHECK(it != occ.end(), "trace not found on its vertex");
    occ.erase(it);
  }

  void process(const EdgeFlipEvent& ev) {
    const Index a = ev.edge.a, b = ev.edge.b;
    Index e = ev.edge_index;
    if (e >= mesh_.num_real_edges() || mesh_.edges()[e] != ev.edge)
      e = static_cast<Index>(
          std::lower_bound(mesh_.edges().begin(), mesh_.edges().begin() + static_cast<std::ptrdiff_t>(mesh_.num_real_edges()), ev.edge) -
          mesh_.edges().begin());
    const auto before = std::make_pair(types_[a], types_[b]);
    TINSCALE_CHECK((up_[e] != 0) == ev.a_was_above, "edge orientation out of sync with event");
    up_[e] = up_[e] ? 0 : 1;
    const auto after = std::make_pair(classify(a), classify(b));
    types_[a] = after.first;
    types_[b] = after.second;
    const auto seq = seq_++;

    const auto kind = classify_transition(before, after);
    if (kind) {
      std::array<EndpointState, 2> ends{EndpointState{a, before.first, after.first, occupants_[a]},
                                        EndpointState{b, before.second, after.second, occupants_[b]}};
      const auto steps = decompose_kfold(ends, result_.traces, ev.edge);
      TINSCALE_CHECK(*kind == TransitionKind::Compound || steps.size() == 1, "primitive transition decomposed into several steps");
      std::size_t compound_slot = 0;
      if (*kind == TransitionKind::Compound) {
        compound_slot = result_.transitions.size();
        result_.transitions.push_back({ev, TransitionKind::Compound, before, after, {}, false});
      }
      for (const auto& st : steps) {
        auto rec = apply(st, ev, seq);
        rec.before = before;
        rec.after = after;
        rec.part_of_compound = *kind == TransitionKind::Compound;
        if (rec.part_of_compound) {
          auto& ids = result_.transitions[compound_slot].traces;
          ids.insert(ids.end(), rec.traces.begin(), rec.traces.end());
        }
        result_.transitions.push_back(std::move(rec));
      }
    }
    // Conservation: the endpoint types must agree with their traces and the
    // component's alternating count must stay put.
    const Index comp = mesh_.component(a);
    tally_[comp] += after.first.index() + after.second.index() - before.first.index() - before.second.index();
    if (kind) {
      TINSCALE_CHECK(occupancy_type(a) == after.first && occupancy_type(b) == after.second,
                     "trace occupancy disagrees with vertex types after event");
    }
    if (event_observer_) event_observer_(EventContext{ev, seq, before, after, *this});
  }

  TransitionRecord apply(const PrimitiveStep& st, const EdgeFlipEvent& ev, std::uint64_t seq) {
    TransitionRecord rec;
    rec.event = ev;
    rec.kind = st.kind;
    auto& traces = result_.traces;
    switch (st.kind) {
      case TransitionKind::Displacement: {
        auto& tr = traces[st.first];
        remove_occupant(st.from, tr.id);
        occupants_[st.to].push_back(tr.id);
        tr.current_vertex = st.to;
        tr.path.push_back({ev.t, st.from, st.to});
        tr.last_edge = ev.edge;
        tr.last_move_t = ev.t;
        rec.traces = {tr.id};
        break;
      }
      case TransitionKind::Collapse: {
        auto& x = traces[st.first];
        auto& s = traces[st.second];
        remove_occupant(x.current_vertex, x.id);
        remove_occupant(s.current_vertex, s.id);
        x.death_t = s.death_t = ev.t;
        x.death_seq = s.death_seq = seq;
        x.death_mate = s.id;
        s.death_mate = x.id;
        rec.traces = {x.id, s.id};
        break;
      }
      case TransitionKind::Appearance: {
        const Index x = new_trace(st.extremum_kind, Origin::Newborn, ev.t, st.to);
        const Index s = new_trace(TraceKind::Saddle, Origin::Newborn, ev.t, st.from);
        traces[x].birth_mate = s;
        traces[s].birth_mate = x;
        rec.traces = {x, s};
        break;
      }
      case TransitionKind::Compound:
        throw InvariantError("compound step cannot be applied directly");
    }
    return rec;
  }
};

inline TrackingResult track_scale_space(const Tin& tin, const ScaleSpace& ss) {
  return ScaleSpaceTracker(tin, ss).run();
}

// ---------------------------------------------------------------------------
// Life spans

enum class Terminal : std::uint8_t { Survived, CollapsedWithInitial };

inline const char* to_string(Terminal t) { return t == Terminal::Survived ? "SURVIVED" : "COLLAPSED_WITH_INITIAL"; }

struct LifeSpanEntry {
  Index trace = 0;
  double life_span = 0.0;
  Terminal terminal = Terminal::Survived;
  std::vector<Index> substitutes;  // chain of traces that stood in for it
};

struct LifeSpanTable {
  std::vector<LifeSpanEntry> entries;  // one per non-synthetic initial trace, by id

  const LifeSpanEntry* find(Index trace) const {
    for (const auto& e : entries) {
      if (e.trace == trace) return &e;
    }
    return nullptr;
  }
};

// An initial critical point that collapses with a newborn one is continued
// by the newborn's birth mate, provided that mate is still alive and of the
// same kind. The chain ends at the last layer (survived) or when the current
// stand-in collapses with an initial trace or another initial's stand-in.
// Collapses are replayed in processing order.
inline LifeSpanTable recover_life_spans(std::span<const CriticalPointTrace> traces, int num_layers) {
  const double L = static_cast<double>(num_layers);
  std::vector<Index> rep(traces.size(), kInvalidIndex);  // trace -> initial it stands for
  LifeSpanTable table;
  std::vector<std::size_t> slot(traces.size(), 0);
  for (const auto& tr : traces) {
    if (tr.origin != Origin::Initial) continue;
    rep[tr.id] = tr.id;
    if (tr.synthetic) continue;
    slot[tr.id] = table.entries.size();
    table.entries.push_back({tr.id, L, Terminal::Survived, {}});
  }

  std::vector<Index> deaths;
  for (const auto& tr : traces) {
    if (!tr.alive() && tr.death_mate && tr.id < *tr.death_mate) deaths.push_back(tr.id);
  }
  std::sort(deaths.begin(), deaths.end(), [&](Index x, Index y) { return traces[x].death_seq < traces[y].death_seq; });

  std::vector<std::uint8_t> used(traces.size(), 0);
  auto finish = [&](Index initial, double t) {
    if (initial == kInvalidIndex || traces[initial].synthetic) return;
    auto& entry = table.entries[slot[initial]];
    entry.life_span = t;
    entry.terminal = Terminal::CollapsedWithInitial;
  };
  for (Index x : deaths) {
    const Index y = *traces[x].death_mate;
    const double t = *traces[x].death_t;
    const Index rx = rep[x], ry = rep[y];
    if (rx != kInvalidIndex && ry != kInvalidIndex) {
      finish(rx, t);
      finish(ry, t);
      continue;
    }
    // Exactly one side may carry an initial; the other is a free newborn.
    const Index carrier = rx != kInvalidIndex ? x : y;
    const Index newborn = rx != kInvalidIndex ? y : x;
    const Index initial = rep[carrier];
    if (initial == kInvalidIndex) continue;
    const auto& nb = traces[newborn];
    TINSCALE_CHECK(!used[newborn], "newborn pair reused in life-span recovery");
    used[newborn] = 1;
    if (nb.birth_mate) {
      const auto& mate = traces[*nb.birth_mate];
      const bool alive_after = mate.death_seq > traces[x].death_seq;
      if (alive_after && mate.kind == traces[initial].kind && rep[mate.id] == kInvalidIndex) {
        rep[mate.id] = initial;
        if (!traces[initial].synthetic) table.entries[slot[initial]].substitutes.push_back(mate.id);
        continue;
      }
    }
    finish(initial, t);
  }
  return table;
}

}  // namespace tinscale
