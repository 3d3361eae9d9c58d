#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "shapecomp/errors.hpp"
#include "shapecomp/mesh.hpp"
#include "testutil.hpp"

using namespace shapecomp;

TEST(Icosphere, LevelZeroCombinatorics) {
  const Mesh m = icosphere(0);
  EXPECT_EQ(m.vertex_count(), 12);
  EXPECT_EQ(m.topology().faces().size(), 20u);
  EXPECT_EQ(m.topology().edges().size(), 30u);
}

TEST(Icosphere, LevelFourVertexCount) {
  const Mesh m = icosphere(4);
  EXPECT_EQ(m.vertex_count(), 2562);
  EXPECT_EQ(m.topology().euler_characteristic(), 2);
}

TEST(Icosphere, UnitNorms) {
  const Mesh m = icosphere(1);
  EXPECT_EQ(m.vertex_count(), 42);
  for (int i = 0; i < m.vertex_count(); ++i) EXPECT_NEAR(m.vertex(i).norm(), 1.0, 1e-12);
}

TEST(Icosphere, LevelCap) {
  EXPECT_THROW(icosphere(kMaxIcosphereLevel + 1), BoundError);
  EXPECT_THROW(icosphere(-1), ContractError);
}

TEST(Icosphere, Deterministic) {
  EXPECT_EQ(icosphere(3).fingerprint(), icosphere(3).fingerprint());
  EXPECT_NE(icosphere(2).fingerprint(), icosphere(3).fingerprint());
}

TEST(Topology, SingleTriangle) {
  const auto t = build_topology({{0, 1, 2}}, 3);
  const std::vector<Edge> expected{{0, 1}, {0, 2}, {1, 2}};
  EXPECT_EQ(t->edges(), expected);
  const auto n0 = t->neighbors(0);
  EXPECT_EQ(std::vector<int>(n0.begin(), n0.end()), (std::vector<int>{1, 2}));
}

TEST(Topology, IcosahedronDegreeFive) {
  const Mesh m = icosphere(0);
  for (int i = 0; i < 12; ++i) EXPECT_EQ(m.topology().degree(i), 5);
}

TEST(Topology, SharedEdgeOnce) {
  const auto t = build_topology({{0, 1, 2}, {2, 1, 3}}, 4);
  EXPECT_EQ(t->edges().size(), 5u);
  EXPECT_EQ(std::count(t->edges().begin(), t->edges().end(), Edge{1, 2}), 1);
}

TEST(Topology, RejectsBadFaces) {
  EXPECT_THROW(build_topology({{0, 1, 3}}, 3), StructureError);
  EXPECT_THROW(build_topology({{0, 1, 1}}, 3), StructureError);
  EXPECT_THROW(build_topology({{-1, 1, 2}}, 3), StructureError);
}

TEST(Topology, Connectivity) {
  EXPECT_TRUE(icosphere(1).topology().is_connected());
  EXPECT_FALSE(build_topology({{0, 1, 2}, {3, 4, 5}}, 6)->is_connected());
}

TEST(Normals, MatchesAreaWeightedOracle) {
  const Mesh m = testutil::bumpy_sphere(2, 8, 0.1);
  Tensor acc = Tensor::Zero(m.vertex_count(), 3);
  for (const Face& f : m.topology().faces()) {
    const Vec3 a = m.vertex(f[0]), b = m.vertex(f[1]), c = m.vertex(f[2]);
    const Vec3 n = (b - a).cross(c - a);
    for (int v : f) acc.row(v) += n.transpose();
  }
  const Tensor n = vertex_normals(m);
  for (int i = 0; i < m.vertex_count(); ++i) EXPECT_LT((n.row(i) - acc.row(i).normalized()).norm(), 1e-12);
}

TEST(Normals, SphereRadial) {
  // Area weighting on a level-2 icosphere deviates from the radial
  // direction by up to 0.0236 rad at vertices with irregular rings.
  const Mesh m = icosphere(2);
  const Tensor n = vertex_normals(m);
  double worst = 0.0;
  for (int i = 0; i < m.vertex_count(); ++i) {
    const double c = n.row(i).dot(m.vertices().row(i));
    worst = std::max(worst, std::acos(std::min(1.0, c)));
  }
  EXPECT_LT(worst, 0.025);
  EXPECT_GT(worst, 0.02);
}

TEST(Normals, PlanarFan) {
  Tensor v(5, 3);
  v << 0, 0, 0, 1, 0, 0, 0, 1, 0, -1, 0, 0, 0, -1, 0;
  const Mesh m(v, build_topology({{0, 1, 2}, {0, 2, 3}, {0, 3, 4}, {0, 4, 1}}, 5));
  const Tensor n = vertex_normals(m);
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(n(i, 0), 0.0, 1e-15);
    EXPECT_NEAR(n(i, 1), 0.0, 1e-15);
    EXPECT_NEAR(n(i, 2), 1.0, 1e-15);
  }
}

TEST(Normals, RandomMeshUnitLength) {
  CounterRng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const Mesh m = testutil::bumpy_sphere(2, 100 + trial, 0.2);
    const Tensor n = vertex_normals(m);
    for (int i = 0; i < m.vertex_count(); ++i) EXPECT_NEAR(n.row(i).norm(), 1.0, 1e-12);
  }
}

TEST(Normals, ZeroNormalNamesVertex) {
  Tensor v = Tensor::Zero(3, 3);
  const Mesh m(v, build_topology({{0, 1, 2}}, 3));
  try {
    vertex_normals(m);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("vertex 0"), std::string::npos);
  }
}

TEST(Centering, PairExample) {
  Tensor p(2, 3);
  p << 1, 1, 1, 3, 3, 3;
  const auto [c, mu] = centroid_center(p);
  EXPECT_TRUE(mu.isApprox(Vec3(2, 2, 2)));
  EXPECT_DOUBLE_EQ(c(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(c(1, 2), 1.0);
}

TEST(Centering, Idempotent) {
  CounterRng rng(4);
  const auto [c, mu] = centroid_center(testutil::random_tensor(50, 3, rng));
  const auto [c2, mu2] = centroid_center(c);
  EXPECT_LT(mu2.norm(), 1e-12);
  EXPECT_LT(max_row_distance(c, c2), 1e-12);
}

TEST(Mesh, RejectsMismatchedRows) {
  const Mesh m = icosphere(0);
  EXPECT_THROW(m.with_vertices(Tensor::Zero(11, 3)), ContractError);
}

TEST(Mesh, RequireSameTopology) {
  EXPECT_THROW(require_same_topology("a", "b", "mesh"), TopologyError);
  EXPECT_NO_THROW(require_same_topology("a", "a", "mesh"));
}
