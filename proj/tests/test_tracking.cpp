#include <gtest/gtest.h>

#include "support.hpp"

using namespace tinscale;
using testsupport::delta_scan;
using testsupport::LinkOracle;
using testsupport::random_scale_space;
using testsupport::random_tin;

namespace {

double z_at(const std::vector<double>& a, const std::vector<double>& b, Index v, double delta) {
  return delta * b[v] + (1.0 - delta) * a[v];
}

ScaleSpace smoothed(const Tin& tin, std::vector<double> z, int layers) {
  SmoothingConfig cfg;
  cfg.num_layers = layers;
  return build_scale_space(tin, std::move(z), cfg);
}

CriticalPointTrace make_trace(Index id, TraceKind kind, Origin origin) {
  CriticalPointTrace tr;
  tr.id = id;
  tr.kind = kind;
  tr.origin = origin;
  return tr;
}

void kill(std::vector<CriticalPointTrace>& traces, Index x, Index y, double t, std::uint64_t seq) {
  traces[x].death_t = traces[y].death_t = t;
  traces[x].death_seq = traces[y].death_seq = seq;
  traces[x].death_mate = y;
  traces[y].death_mate = x;
}

void born(std::vector<CriticalPointTrace>& traces, Index x, Index s, double t) {
  traces[x].birth_t = traces[s].birth_t = t;
  traces[x].birth_mate = s;
  traces[s].birth_mate = x;
}

}  // namespace

TEST(EdgeFlipTime, CrossingAtMidpoint) {
  const std::vector<double> zi{0.0, 1.0}, zn{1.0, 0.0};
  const auto ev = edge_flip_time(zi, zn, {0, 1}, 2);
  ASSERT_TRUE(ev);
  EXPECT_DOUBLE_EQ(ev->t, 2.5);
  EXPECT_EQ(ev->layer, 2);
  EXPECT_FALSE(ev->a_was_above);
}

TEST(EdgeFlipTime, CrossingAtTwoThirds) {
  const std::vector<double> zi{0.0, 2.0}, zn{2.0, 1.0};
  const auto ev = edge_flip_time(zi, zn, {0, 1}, 0);
  ASSERT_TRUE(ev);
  EXPECT_NEAR(ev->t, 2.0 / 3.0, 1e-15);
}

TEST(EdgeFlipTime, NoFlipWhenOrderKept) {
  const std::vector<double> zi{0.0, 1.0}, zn{0.5, 2.0};
  EXPECT_FALSE(edge_flip_time(zi, zn, {0, 1}, 0));
  // Equal values both times: the index decides, no flip.
  const std::vector<double> flat{3.0, 3.0};
  EXPECT_FALSE(edge_flip_time(flat, flat, {0, 1}, 0));
}

TEST(EdgeFlipTime, TieAtLayerStaysInsideInterval) {
  const std::vector<double> tie{1.0, 1.0}, up{2.0, 1.0};
  const auto start = edge_flip_time(tie, up, {0, 1}, 3);
  ASSERT_TRUE(start);
  EXPECT_GT(start->t, 3.0);
  EXPECT_LT(start->t, 3.0 + 1e-12);
  const auto end = edge_flip_time(up, tie, {0, 1}, 3);
  ASSERT_TRUE(end);
  EXPECT_LT(end->t, 4.0);
  EXPECT_GT(end->t, 4.0 - 1e-12);
  EXPECT_TRUE(end->a_was_above);
}

TEST(EdgeFlipTime, InterpolatedValuesMeetAtTimestamp) {
  Rng rng(31);
  int flips = 0;
  for (int k = 0; k < 5000; ++k) {
    const std::vector<double> zi{rng.uniform(-50, 50), rng.uniform(-50, 50)};
    const std::vector<double> zn{rng.uniform(-50, 50), rng.uniform(-50, 50)};
    const auto ev = edge_flip_time(zi, zn, {0, 1}, 1);
    if (!ev) continue;
    ++flips;
    ASSERT_GT(ev->t, 1.0);
    ASSERT_LT(ev->t, 2.0);
    const double d = ev->t - 1.0;
    EXPECT_LT(std::abs(z_at(zi, zn, 0, d) - z_at(zi, zn, 1, d)), 1e-9);
  }
  EXPECT_GT(flips, 1000);
}

TEST(DetectEvents, SortedAndMatchesSignScan) {
  const Tin tin = random_tin(120, 4);
  const auto ss = random_scale_space(tin.num_vertices(), 1, 4);
  const auto events = detect_events(ss, tin, 0);
  EXPECT_TRUE(std::is_sorted(events.begin(), events.end(), [](const auto& x, const auto& y) { return x.t < y.t; }));
  const auto& za = ss.layer(0);
  const auto& zb = ss.layer(1);
  std::size_t k = 0;
  for (const auto& e : tin.edges()) {
    const bool at0 = za[e.a] > za[e.b];
    const bool at1 = zb[e.a] > zb[e.b];
    const auto it = std::find_if(events.begin(), events.end(), [&](const EdgeFlipEvent& x) { return x.edge == e; });
    EXPECT_EQ(it != events.end(), at0 != at1);
    if (it == events.end()) continue;
    ++k;
    // The sign is unchanged just before t and flipped just after.
    const double before = it->t - 1e-7, after = it->t + 1e-7;
    EXPECT_EQ(z_at(za, zb, e.a, before) > z_at(za, zb, e.b, before), at0);
    EXPECT_EQ(z_at(za, zb, e.a, after) > z_at(za, zb, e.b, after), at1);
  }
  EXPECT_EQ(k, events.size());
  EXPECT_THROW(detect_events(ss, tin, 1), UsageError);
}

TEST(DetectEvents, ConcurrentCrossingIsAdjacentSwaps) {
  // Three lines through one point. Flipping (0, 2) first would leave a
  // cyclic orientation 0 < 1 < 2 < 0.
  const std::vector<double> zi{0.0, 1.0, 2.0}, zn{2.0, 1.0, 0.0};
  const std::vector<Edge> edges{{1, 2}, {0, 2}, {0, 1}};
  const auto ev = detect_events(zi, zn, edges, 0);
  ASSERT_EQ(ev.size(), 3u);
  EXPECT_EQ(ev[0].edge, (Edge{0, 1}));
  EXPECT_EQ(ev[1].edge, (Edge{0, 2}));
  EXPECT_EQ(ev[2].edge, (Edge{1, 2}));
}

TEST(ClassifyTransition, Kinds) {
  const auto R = CriticalType::regular(), M = CriticalType::maximum(), m = CriticalType::minimum();
  const auto S = CriticalType::saddle(1), S2 = CriticalType::saddle(2);
  EXPECT_EQ(classify_transition({M, R}, {R, M}), TransitionKind::Displacement);
  EXPECT_EQ(classify_transition({R, S}, {S, R}), TransitionKind::Displacement);
  EXPECT_EQ(classify_transition({R, R}, {M, S}), TransitionKind::Appearance);
  EXPECT_EQ(classify_transition({R, R}, {S, m}), TransitionKind::Appearance);
  EXPECT_EQ(classify_transition({m, S}, {R, R}), TransitionKind::Collapse);
  EXPECT_EQ(classify_transition({S2, M}, {R, S}), TransitionKind::Compound);
  EXPECT_FALSE(classify_transition({M, S}, {M, S}));
  EXPECT_THROW(classify_transition({M, R}, {R, R}), InvariantError);
  EXPECT_THROW(classify_transition({S, R}, {R, S2}), InvariantError);
}

TEST(MatchVelocity, Priorities) {
  std::vector<CriticalPointTrace> traces;
  for (Index k = 0; k < 4; ++k) traces.push_back(make_trace(k, TraceKind::Saddle, Origin::Initial));
  const Edge e{3, 8};
  traces[0].last_move_t = 0.5;
  traces[1].last_move_t = 2.5;
  traces[2].last_move_t = 1.0;
  traces[2].last_edge = e;
  traces[3].last_move_t = 2.5;
  const std::vector<Index> all{3, 2, 1, 0};
  EXPECT_EQ(match_velocity(all, traces, e), 2u);
  // Without alignment: most recent, then lowest id.
  EXPECT_EQ(match_velocity(all, traces, Edge{1, 2}), 1u);
  const std::vector<Index> two{3, 0};
  EXPECT_EQ(match_velocity(two, traces, Edge{1, 2}), 3u);
  const std::vector<Index> none;
  EXPECT_THROW(match_velocity(none, traces, e), InvariantError);
}

TEST(DecomposeKFold, TwoFoldAndMaximum) {
  std::vector<CriticalPointTrace> traces{make_trace(0, TraceKind::Saddle, Origin::Initial),
                                         make_trace(1, TraceKind::Saddle, Origin::Initial),
                                         make_trace(2, TraceKind::Maximum, Origin::Initial)};
  const std::array<EndpointState, 2> ends{EndpointState{10, CriticalType::saddle(2), CriticalType::regular(), {0, 1}},
                                          EndpointState{11, CriticalType::maximum(), CriticalType::saddle(1), {2}}};
  const auto steps = decompose_kfold(ends, traces, Edge{10, 11});
  ASSERT_EQ(steps.size(), 2u);
  EXPECT_EQ(steps[0].kind, TransitionKind::Collapse);
  EXPECT_EQ(steps[0].first, 2u);
  EXPECT_EQ(steps[1].kind, TransitionKind::Displacement);
  EXPECT_EQ(steps[1].from, 10u);
  EXPECT_EQ(steps[1].to, 11u);
  EXPECT_NE(steps[0].second, steps[1].first);
}

TEST(DecomposeKFold, ThreeFoldAndMaximum) {
  std::vector<CriticalPointTrace> traces;
  for (Index k = 0; k < 3; ++k) traces.push_back(make_trace(k, TraceKind::Saddle, Origin::Initial));
  traces.push_back(make_trace(3, TraceKind::Maximum, Origin::Initial));
  const std::array<EndpointState, 2> ends{EndpointState{0, CriticalType::saddle(3), CriticalType::regular(), {0, 1, 2}},
                                          EndpointState{1, CriticalType::maximum(), CriticalType::saddle(2), {3}}};
  const auto steps = decompose_kfold(ends, traces, Edge{0, 1});
  ASSERT_EQ(steps.size(), 3u);
  EXPECT_EQ(steps[0].kind, TransitionKind::Collapse);
  EXPECT_EQ(steps[1].kind, TransitionKind::Displacement);
  EXPECT_EQ(steps[2].kind, TransitionKind::Displacement);
}

TEST(DecomposeKFold, SaddleDisplacementUsesVelocity) {
  std::vector<CriticalPointTrace> traces{make_trace(0, TraceKind::Saddle, Origin::Initial),
                                         make_trace(1, TraceKind::Saddle, Origin::Initial)};
  traces[1].last_edge = Edge{4, 5};
  const std::array<EndpointState, 2> ends{EndpointState{4, CriticalType::saddle(2), CriticalType::saddle(1), {0, 1}},
                                          EndpointState{5, CriticalType::regular(), CriticalType::saddle(1), {}}};
  const auto steps = decompose_kfold(ends, traces, Edge{4, 5});
  ASSERT_EQ(steps.size(), 1u);
  EXPECT_EQ(steps[0].kind, TransitionKind::Displacement);
  EXPECT_EQ(steps[0].first, 1u);
}

TEST(DecomposeKFold, SimpleMovesAndPairs) {
  std::vector<CriticalPointTrace> traces{make_trace(0, TraceKind::Saddle, Origin::Initial),
                                         make_trace(1, TraceKind::Minimum, Origin::Initial)};
  {
    const std::array<EndpointState, 2> ends{EndpointState{0, CriticalType::saddle(1), CriticalType::regular(), {0}},
                                            EndpointState{1, CriticalType::regular(), CriticalType::saddle(1), {}}};
    const auto steps = decompose_kfold(ends, traces, Edge{0, 1});
    ASSERT_EQ(steps.size(), 1u);
    EXPECT_EQ(steps[0].kind, TransitionKind::Displacement);
    EXPECT_EQ(steps[0].first, 0u);
  }
  {
    const std::array<EndpointState, 2> ends{EndpointState{0, CriticalType::regular(), CriticalType::minimum(), {}},
                                            EndpointState{1, CriticalType::regular(), CriticalType::saddle(1), {}}};
    const auto steps = decompose_kfold(ends, traces, Edge{0, 1});
    ASSERT_EQ(steps.size(), 1u);
    EXPECT_EQ(steps[0].kind, TransitionKind::Appearance);
    EXPECT_EQ(steps[0].to, 0u);
    EXPECT_EQ(steps[0].from, 1u);
    EXPECT_EQ(steps[0].extremum_kind, TraceKind::Minimum);
  }
  {
    const std::array<EndpointState, 2> ends{EndpointState{7, CriticalType::saddle(1), CriticalType::regular(), {0}},
                                            EndpointState{8, CriticalType::minimum(), CriticalType::regular(), {1}}};
    const auto steps = decompose_kfold(ends, traces, Edge{7, 8});
    ASSERT_EQ(steps.size(), 1u);
    EXPECT_EQ(steps[0].kind, TransitionKind::Collapse);
    EXPECT_EQ(steps[0].first, 1u);
    EXPECT_EQ(steps[0].second, 0u);
  }
}

TEST(Tracker, RejectsBadInput) {
  const Tin tin = random_tin(30, 1);
  ScaleSpace one;
  one.layers.push_back(tin.elevations());
  EXPECT_THROW(ScaleSpaceTracker(tin, one), UsageError);
  auto wrong = random_scale_space(tin.num_vertices() + 1, 2, 1);
  EXPECT_THROW(ScaleSpaceTracker(tin, wrong), DataError);
}

TEST(Tracker, MonotoneRampHasNoEvents) {
  const Tin tin = random_tin(80, 2);
  ScaleSpace ss;
  for (int i = 0; i <= 3; ++i) {
    std::vector<double> z;
    for (const auto& p : tin.vertices()) z.push_back((i + 1) * (p.x + 0.1 * p.y));
    ss.layers.push_back(z);
  }
  const auto res = track_scale_space(tin, ss);
  for (auto n : res.events_per_layer) EXPECT_EQ(n, 0u);
  EXPECT_TRUE(res.transitions.empty());
  for (const auto& tr : res.traces) {
    EXPECT_TRUE(tr.alive());
    EXPECT_TRUE(tr.path.empty());
  }
}

TEST(Tracker, MatchesOracleOnRandomLayers) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Tin tin = random_tin(60 + 40 * seed, seed);
    const auto ss = random_scale_space(tin.num_vertices(), 3, seed + 10);
    const auto rep = delta_scan(tin, ss, 2000);
    EXPECT_GT(rep.events, 0u);
    EXPECT_EQ(rep.mismatches, 0u);
    EXPECT_EQ(rep.layer_mismatches, 0u);
    EXPECT_LT(rep.skipped, rep.samples / 10);
  }
}

TEST(DetectEvents, TiedAtLayerFollowSlopes) {
  // All four tied at layer 0; afterwards ordered by slope.
  const std::vector<double> zi{1.0, 1.0, 1.0, 1.0}, zn{4.0, 3.0, 2.0, 1.0};
  const std::vector<Edge> edges{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  const auto ev = detect_events(zi, zn, edges, 0);
  ASSERT_EQ(ev.size(), 6u);
  // Replay on a rank array: every flip must swap neighbours in the order.
  std::vector<int> rank{0, 1, 2, 3};
  for (const auto& e : ev) {
    EXPECT_EQ(std::abs(rank[e.edge.a] - rank[e.edge.b]), 1);
    std::swap(rank[e.edge.a], rank[e.edge.b]);
  }
  EXPECT_EQ(rank, (std::vector<int>{3, 2, 1, 0}));
}

TEST(Tracker, MatchesOracleWithTies) {
  // Integer elevations make many exact ties at the layers.
  const Tin tin = random_tin(90, 8);
  Rng rng(8);
  ScaleSpace ss;
  for (int i = 0; i <= 3; ++i) {
    std::vector<double> z(tin.num_vertices());
    for (auto& x : z) x = static_cast<double>(rng.below(3));
    ss.layers.push_back(z);
  }
  const auto rep = delta_scan(tin, ss, 2000);
  EXPECT_EQ(rep.mismatches, 0u);
  EXPECT_EQ(rep.layer_mismatches, 0u);
}

TEST(Tracker, MatchesOracleOnSmoothedNoise) {
  const Tin tin = random_tin(200, 12);
  Rng rng(12);
  const auto ss = smoothed(tin, testsupport::random_values(tin.num_vertices(), rng), 3);
  const auto rep = delta_scan(tin, ss, 2000);
  EXPECT_GT(rep.events, 0u);
  EXPECT_EQ(rep.mismatches, 0u);
  EXPECT_EQ(rep.layer_mismatches, 0u);
}

TEST(Tracker, AlternatingCountConservedEveryEvent) {
  const Tin tin = random_tin(150, 21);
  const auto ss = random_scale_space(tin.num_vertices(), 3, 21);
  ScaleSpaceTracker tracker(tin, ss);
  std::size_t checked = 0;
  tracker.on_event([&](const EventContext& ctx) {
    const auto& m = ctx.tracker.mesh();
    for (Index c = 0; c < m.num_components(); ++c) ASSERT_EQ(ctx.tracker.alternating(c), 2);
    ++checked;
  });
  tracker.on_layer([&](int layer, const ScaleSpaceTracker& tr) {
    EXPECT_EQ(euler_count(tr.mesh(), ss.layer(layer)).total.alternating(), 2);
  });
  const auto res = tracker.run();
  EXPECT_EQ(checked, std::accumulate(res.events_per_layer.begin(), res.events_per_layer.end(), std::size_t{0}));
}

TEST(Tracker, FinalTracesMatchLastLayer) {
  const Tin tin = random_tin(140, 33);
  const auto ss = random_scale_space(tin.num_vertices(), 2, 33);
  const auto res = track_scale_space(tin, ss);
  const LinkOracle oracle(tin);
  std::vector<std::vector<Index>> occ(tin.num_vertices() + 8);
  for (const auto& tr : res.traces) {
    if (tr.alive()) occ[tr.current_vertex].push_back(tr.id);
  }
  for (Index v = 0; v < tin.num_vertices(); ++v) {
    EXPECT_EQ(ScaleSpaceTracker::type_from_traces(occ[v], res.traces), oracle.classify(ss.layer(2), v)) << v;
  }
}

TEST(Tracker, TransitionRecordsConsistent) {
  const Tin tin = random_tin(150, 44);
  const auto ss = random_scale_space(tin.num_vertices(), 3, 44);
  const auto res = track_scale_space(tin, ss);
  std::size_t compound = 0, appearances = 0, collapses = 0, newborn = 0, dead = 0;
  const EdgeFlipEvent* compound_event = nullptr;
  for (std::size_t k = 0; k < res.transitions.size(); ++k) {
    const auto& r = res.transitions[k];
    if (k > 0) {
      EXPECT_GE(r.event.t, res.transitions[k - 1].event.t);
    }
    if (r.kind == TransitionKind::Compound) {
      ++compound;
      compound_event = &r.event;
      EXPECT_FALSE(r.part_of_compound);
      continue;
    }
    if (r.part_of_compound) {
      ASSERT_NE(compound_event, nullptr);
      EXPECT_EQ(r.event, *compound_event);
    }
    if (r.kind == TransitionKind::Appearance) {
      ++appearances;
      ASSERT_EQ(r.traces.size(), 2u);
      EXPECT_EQ(res.traces[r.traces[1]].kind, TraceKind::Saddle);
      EXPECT_EQ(res.traces[r.traces[0]].birth_t, r.event.t);
    }
    if (r.kind == TransitionKind::Collapse) {
      ++collapses;
      ASSERT_EQ(r.traces.size(), 2u);
      EXPECT_EQ(*res.traces[r.traces[0]].death_mate, r.traces[1]);
    }
    if (r.kind == TransitionKind::Displacement) {
      EXPECT_EQ(r.traces.size(), 1u);
    }
  }
  for (const auto& tr : res.traces) {
    if (tr.origin == Origin::Newborn) ++newborn;
    if (!tr.alive()) ++dead;
    if (!tr.is_extremum()) continue;
    EXPECT_TRUE(!tr.birth_mate || tr.origin == Origin::Newborn);
  }
  EXPECT_GT(appearances + collapses, 0u);
  EXPECT_EQ(newborn, 2 * appearances);
  EXPECT_EQ(dead, 2 * collapses);
  EXPECT_GT(compound, 0u) << "random layers should produce some multi-saddle events";
}

TEST(Tracker, Deterministic) {
  const Tin tin = random_tin(160, 50);
  const auto ss = random_scale_space(tin.num_vertices(), 3, 50);
  const auto a = track_scale_space(tin, ss);
  const auto b = track_scale_space(tin, ss);
  ASSERT_EQ(a.traces.size(), b.traces.size());
  ASSERT_EQ(a.transitions.size(), b.transitions.size());
  for (std::size_t k = 0; k < a.traces.size(); ++k) {
    EXPECT_EQ(a.traces[k].current_vertex, b.traces[k].current_vertex);
    EXPECT_EQ(a.traces[k].death_seq, b.traces[k].death_seq);
  }
  for (std::size_t k = 0; k < a.transitions.size(); ++k) {
    EXPECT_EQ(a.transitions[k].traces, b.transitions[k].traces);
    EXPECT_EQ(a.transitions[k].kind, b.transitions[k].kind);
  }
}

TEST(Tracker, LowBumpCollapsesFirst) {
  const std::vector<Bump> bumps{{12, 12, 10, 3}, {26, 12, 3, 2.5}};
  const Tin tin = grid_tin(41, 25, 1.0, [&](double x, double y) { return bumps_value(bumps, x, y); });
  const auto ss = smoothed(tin, tin.elevations(), 8);
  const auto res = track_scale_space(tin, ss);
  const auto spans = recover_life_spans(res.traces, res.num_layers);
  const LifeSpanEntry* high = nullptr;
  const LifeSpanEntry* low = nullptr;
  for (const auto& e : spans.entries) {
    const auto& tr = res.traces[e.trace];
    if (tr.kind != TraceKind::Maximum) continue;
    const auto& p = tin.vertex(tr.birth_vertex);
    if (std::hypot(p.x - 12, p.y - 12) < 1.5) high = &e;
    if (std::hypot(p.x - 26, p.y - 12) < 1.5) low = &e;
  }
  ASSERT_NE(high, nullptr);
  ASSERT_NE(low, nullptr);
  EXPECT_EQ(high->terminal, Terminal::Survived);
  EXPECT_DOUBLE_EQ(high->life_span, 8.0);
  EXPECT_EQ(low->terminal, Terminal::CollapsedWithInitial);
  EXPECT_LT(low->life_span, high->life_span);
}

TEST(LifeSpans, SurvivorGetsL) {
  std::vector<CriticalPointTrace> traces{make_trace(0, TraceKind::Maximum, Origin::Initial)};
  const auto t = recover_life_spans(traces, 6);
  ASSERT_EQ(t.entries.size(), 1u);
  EXPECT_EQ(t.entries[0].life_span, 6.0);
  EXPECT_EQ(t.entries[0].terminal, Terminal::Survived);
}

TEST(LifeSpans, InitialPairCollapse) {
  std::vector<CriticalPointTrace> traces{make_trace(0, TraceKind::Maximum, Origin::Initial),
                                         make_trace(1, TraceKind::Saddle, Origin::Initial)};
  kill(traces, 0, 1, 1.25, 3);
  const auto t = recover_life_spans(traces, 4);
  EXPECT_EQ(t.find(0)->life_span, 1.25);
  EXPECT_EQ(t.find(1)->life_span, 1.25);
  EXPECT_EQ(t.find(0)->terminal, Terminal::CollapsedWithInitial);
}

TEST(LifeSpans, SubstituteCarriesToL) {
  std::vector<CriticalPointTrace> traces{make_trace(0, TraceKind::Maximum, Origin::Initial),
                                         make_trace(1, TraceKind::Maximum, Origin::Newborn),
                                         make_trace(2, TraceKind::Saddle, Origin::Newborn)};
  born(traces, 1, 2, 1.1);
  kill(traces, 0, 2, 1.5, 5);
  const auto t = recover_life_spans(traces, 4);
  ASSERT_EQ(t.entries.size(), 1u);
  EXPECT_EQ(t.entries[0].life_span, 4.0);
  EXPECT_EQ(t.entries[0].terminal, Terminal::Survived);
  EXPECT_EQ(t.entries[0].substitutes, (std::vector<Index>{1}));
}

TEST(LifeSpans, SubstituteChainEndsAtInitialCollapse) {
  std::vector<CriticalPointTrace> traces{make_trace(0, TraceKind::Maximum, Origin::Initial),
                                         make_trace(1, TraceKind::Saddle, Origin::Initial),
                                         make_trace(2, TraceKind::Maximum, Origin::Newborn),
                                         make_trace(3, TraceKind::Saddle, Origin::Newborn),
                                         make_trace(4, TraceKind::Maximum, Origin::Newborn),
                                         make_trace(5, TraceKind::Saddle, Origin::Newborn)};
  born(traces, 2, 3, 0.4);
  kill(traces, 0, 3, 0.9, 2);   // 2 stands in for 0
  born(traces, 4, 5, 1.2);
  kill(traces, 2, 5, 1.7, 6);   // 4 stands in for 0
  kill(traces, 4, 1, 2.75, 9);  // stand-in meets an initial saddle
  const auto t = recover_life_spans(traces, 5);
  EXPECT_EQ(t.find(0)->life_span, 2.75);
  EXPECT_EQ(t.find(0)->terminal, Terminal::CollapsedWithInitial);
  EXPECT_EQ(t.find(0)->substitutes, (std::vector<Index>{2, 4}));
  EXPECT_EQ(t.find(1)->life_span, 2.75);
}

TEST(LifeSpans, NoSubstituteWhenMateDiffers) {
  // Birth mate of the collapsing saddle is a minimum: no stand-in for a maximum.
  std::vector<CriticalPointTrace> traces{make_trace(0, TraceKind::Maximum, Origin::Initial),
                                         make_trace(1, TraceKind::Minimum, Origin::Newborn),
                                         make_trace(2, TraceKind::Saddle, Origin::Newborn)};
  born(traces, 1, 2, 0.5);
  kill(traces, 0, 2, 0.8, 1);
  EXPECT_EQ(recover_life_spans(traces, 3).find(0)->life_span, 0.8);
}

TEST(LifeSpans, NoSubstituteWhenMateAlreadyDead) {
  std::vector<CriticalPointTrace> traces{make_trace(0, TraceKind::Maximum, Origin::Initial),
                                         make_trace(1, TraceKind::Maximum, Origin::Newborn),
                                         make_trace(2, TraceKind::Saddle, Origin::Newborn),
                                         make_trace(3, TraceKind::Saddle, Origin::Newborn),
                                         make_trace(4, TraceKind::Maximum, Origin::Newborn)};
  born(traces, 1, 2, 0.5);
  born(traces, 4, 3, 0.6);
  kill(traces, 1, 3, 0.7, 1);  // mate 1 dies first
  kill(traces, 0, 2, 0.9, 2);
  const auto t = recover_life_spans(traces, 3);
  EXPECT_EQ(t.find(0)->life_span, 0.9);
  EXPECT_TRUE(t.find(0)->substitutes.empty());
}

TEST(LifeSpans, SyntheticInitialsHaveNoEntry) {
  std::vector<CriticalPointTrace> traces{make_trace(0, TraceKind::Minimum, Origin::Initial),
                                         make_trace(1, TraceKind::Maximum, Origin::Initial)};
  traces[0].synthetic = true;
  const auto t = recover_life_spans(traces, 2);
  EXPECT_EQ(t.entries.size(), 1u);
  EXPECT_EQ(t.find(0), nullptr);
}
