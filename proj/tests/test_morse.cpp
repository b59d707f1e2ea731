#include <gtest/gtest.h>

#include "support.hpp"

using namespace tinscale;
using testsupport::LinkOracle;
using testsupport::random_tin;

TEST(Signature, AllTrueIsMaximum) {
  const auto sig = make_signature({true, true, true, true, true, true});
  EXPECT_EQ(sig.k_higher, 0);
  EXPECT_EQ(classify_vertex(sig), CriticalType::maximum());
}

TEST(Signature, AllFalseIsMinimum) {
  const auto sig = make_signature({false, false, false});
  EXPECT_EQ(sig.k_lower, 0);
  EXPECT_EQ(classify_vertex(sig), CriticalType::minimum());
}

TEST(Signature, CyclicWrapMergesEnds) {
  const auto sig = make_signature({true, false, true, false, true});
  EXPECT_EQ(sig.k_higher, 2);
  EXPECT_EQ(sig.k_lower, 2);
  EXPECT_EQ(classify_vertex(sig), CriticalType::saddle(1));
}

TEST(Signature, AlternatingEightIsThreeFold) {
  const auto sig = make_signature({true, false, true, false, true, false, true, false});
  EXPECT_EQ(sig.k_higher, 4);
  EXPECT_EQ(sig.k_lower, 4);
  const auto t = classify_vertex(sig);
  EXPECT_EQ(t.kind, CriticalKind::KFoldSaddle);
  EXPECT_EQ(t.multiplicity, 3);
  EXPECT_EQ(to_string(t), "3-FOLD_SADDLE");
}

TEST(Signature, SingleTransitionIsRegular) {
  EXPECT_EQ(classify_vertex(make_signature({true, true, false, false})), CriticalType::regular());
}

TEST(Signature, ComponentCountsBalanceOnEveryCycle) {
  for (unsigned mask = 0; mask < (1u << 10); ++mask) {
    std::vector<bool> bits(10);
    for (int i = 0; i < 10; ++i) bits[i] = (mask >> i) & 1u;
    const auto sig = make_signature(bits);
    if (sig.k_higher > 0 && sig.k_lower > 0) {
      EXPECT_EQ(sig.k_higher, sig.k_lower);
    }
    const auto ring = classify_ring(bits.size(), [&](std::size_t k) { return bits[k]; });
    EXPECT_EQ(ring, classify_vertex(sig));
  }
}

TEST(Perturbation, StrictTotalOrder) {
  EXPECT_TRUE(above(1.0, 0, 1.0, 5) == false);
  EXPECT_TRUE(above(1.0, 5, 1.0, 0));
  Rng rng(1);
  for (int k = 0; k < 1000; ++k) {
    const double za = static_cast<double>(rng.below(3)), zb = static_cast<double>(rng.below(3));
    const Index a = static_cast<Index>(rng.below(5)), b = static_cast<Index>(rng.below(5));
    if (a == b) continue;
    EXPECT_NE(above(za, a, zb, b), above(zb, b, za, a));
  }
}

TEST(Perturbation, EqualNeighbourWithLargerIndexIsHigher) {
  // Hexagon around vertex 0, everything at the same elevation: the centre
  // has the smallest index, so every neighbour is higher.
  std::vector<Point3> v{{0, 0, 0}};
  for (int k = 0; k < 6; ++k) v.push_back({std::cos(k * M_PI / 3), std::sin(k * M_PI / 3), 0});
  std::vector<Triangle> t;
  for (Index k = 0; k < 6; ++k) t.push_back({0, 1 + k, 1 + (k + 1) % 6});
  const Tin tin = Tin::from_triangles(v, t);
  const auto z = tin.elevations();
  const auto sig = vertex_signature(tin, z, 0);
  for (bool b : sig.bits) EXPECT_FALSE(b);
  EXPECT_EQ(classify_vertex(sig), CriticalType::minimum());
}

TEST(Classify, DominantCentreIsMaximum) {
  std::vector<Point3> v{{0, 0, 10}};
  for (int k = 0; k < 6; ++k) v.push_back({std::cos(k * M_PI / 3), std::sin(k * M_PI / 3), double(k)});
  std::vector<Triangle> t;
  for (Index k = 0; k < 6; ++k) t.push_back({0, 1 + k, 1 + (k + 1) % 6});
  const Tin tin = Tin::from_triangles(v, t);
  const auto z = tin.elevations();
  EXPECT_EQ(classify_vertex(vertex_signature(tin, z, 0)), CriticalType::maximum());
}

TEST(Classify, BoundaryVertexSeesVirtualBelow) {
  // A lone triangle: the highest vertex is a maximum, the others regular.
  const Tin tin = Tin::from_triangles({{0, 0, 1}, {1, 0, 2}, {0, 1, 3}}, {{0, 1, 2}});
  const auto m = ClosedMesh::close(tin);
  const auto z = tin.elevations();
  EXPECT_EQ(m.classify(z, 2), CriticalType::maximum());
  EXPECT_EQ(m.classify(z, 1), CriticalType::regular());
  EXPECT_EQ(m.classify(z, 0), CriticalType::regular());
  EXPECT_EQ(m.classify(z, 3), CriticalType::minimum());
  EXPECT_EQ(euler_count(m, z).total.alternating(), 2);
}

TEST(Classify, MatchesLinkOracleOnRandomMeshes) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const Tin tin = random_tin(150, seed);
    const LinkOracle oracle(tin);
    const auto m = ClosedMesh::close(tin);
    Rng rng(seed * 77);
    for (int rep = 0; rep < 5; ++rep) {
      std::vector<double> z(tin.num_vertices());
      // Coarse values force many ties.
      for (auto& x : z) x = static_cast<double>(rng.below(4));
      for (Index v = 0; v < tin.num_vertices(); ++v) EXPECT_EQ(m.classify(z, v), oracle.classify(z, v)) << v;
    }
  }
}

TEST(ClosedMesh, VirtualVertexPerBoundaryLoop) {
  std::vector<Point3> v{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {5, 5, 0}, {6, 5, 0}, {5, 6, 0}};
  const Tin tin = Tin::from_triangles(v, {{0, 1, 2}, {3, 4, 5}});
  const auto m = ClosedMesh::close(tin);
  EXPECT_EQ(m.num_total(), 8u);
  EXPECT_TRUE(m.is_virtual(6));
  EXPECT_EQ(m.ring(6).size(), 3u);
  EXPECT_EQ(m.num_real_edges(), 6u);
  EXPECT_EQ(m.edges().size(), 12u);
  const auto rep = euler_count(m, tin.elevations());
  ASSERT_EQ(rep.per_component.size(), 2u);
  for (const auto& c : rep.per_component) EXPECT_EQ(c.alternating(), 2);
  EXPECT_EQ(rep.total.alternating(), 4);
}

TEST(ClosedMesh, RingEdgesPointAtRingVertices) {
  const Tin tin = random_tin(90, 5);
  const auto m = ClosedMesh::close(tin);
  for (Index v = 0; v < m.num_total(); ++v) {
    const auto r = m.ring(v);
    const auto re = m.ring_edges(v);
    for (std::size_t k = 0; k < r.size(); ++k) {
      const auto& e = m.edges()[re[k]];
      EXPECT_TRUE((e.a == v && e.b == r[k]) || (e.b == v && e.a == r[k]));
    }
  }
}

TEST(Euler, GaussianBump) {
  const Tin tin = grid_tin(21, 21, 1.0, [](double x, double y) { return std::exp(-((x - 10) * (x - 10) + (y - 10) * (y - 10)) / 20.0); });
  const auto rep = euler_count(tin, tin.elevations());
  EXPECT_EQ(rep.total.n_max, 1);
  EXPECT_EQ(rep.total.n_min, 1);
  EXPECT_EQ(rep.total.n_saddle, 0);
}

TEST(Euler, FlatPlane) {
  const Tin tin = grid_tin(10, 8, 1.0, [](double, double) { return 3.0; });
  EXPECT_EQ(euler_count(tin, tin.elevations()).total.alternating(), 2);
}

TEST(Euler, TwoBumps) {
  const std::vector<Bump> bumps{{15, 15, 10, 4}, {35, 15, 3, 3}};
  const Tin tin = grid_tin(51, 31, 1.0, [&](double x, double y) { return bumps_value(bumps, x, y); });
  const auto rep = euler_count(tin, tin.elevations());
  EXPECT_EQ(rep.total.n_max, 2);
  EXPECT_EQ(rep.total.n_saddle, 1);
  EXPECT_EQ(rep.total.n_min, 1);
}

TEST(Euler, RandomElevationsAlwaysTwo) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Tin tin = random_tin(40 + 30 * seed, seed);
    const auto m = ClosedMesh::close(tin);
    Rng rng(seed);
    for (int rep = 0; rep < 20; ++rep) {
      const auto z = testsupport::random_values(tin.num_vertices(), rng);
      EXPECT_EQ(euler_count(m, z).total.alternating(), 2);
    }
  }
}

TEST(Euler, MeshWithHoles) {
  Rng rng(99);
  RawPointCloud c;
  for (int i = 0; i < 600; ++i) {
    const double x = rng.uniform(0, 100), y = rng.uniform(0, 100);
    if ((x - 30) * (x - 30) + (y - 50) * (y - 50) < 200) continue;
    if ((x - 70) * (x - 70) + (y - 50) * (y - 50) < 200) continue;
    c.points.push_back({x, y, rng.uniform()});
  }
  const Tin tin = alpha_shape_filter(delaunay_triangulate(c), {6.0});
  ASSERT_GE(tin.boundary_cycles().size(), 2u);
  const auto rep = euler_count(tin, tin.elevations());
  for (const auto& comp : rep.per_component) EXPECT_EQ(comp.alternating(), 2);
}
