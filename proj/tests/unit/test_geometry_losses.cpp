#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "shapecomp/geometry_losses.hpp"
#include "shapecomp/gradcheck.hpp"
#include "testutil.hpp"

using namespace shapecomp;

namespace {

double brute_chamfer(const Tensor& a, const Tensor& b, bool squared) {
  auto directed = [&](const Tensor& p, const Tensor& q) {
    double s = 0.0;
    for (Index i = 0; i < p.rows(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < q.rows(); ++j) best = std::min(best, (p.row(i) - q.row(j)).squaredNorm());
      s += squared ? best : std::sqrt(best);
    }
    return s / static_cast<double>(p.rows());
  };
  return directed(a, b) + directed(b, a);
}

double brute_normal(const Mesh& pred, const Tensor& tv, const Tensor& tn) {
  double s = 0.0;
  int count = 0;
  const Tensor& x = pred.vertices();
  for (int i = 0; i < pred.vertex_count(); ++i) {
    int q = 0;
    for (int j = 1; j < tv.rows(); ++j)
      if ((x.row(i) - tv.row(j)).squaredNorm() < (x.row(i) - tv.row(q)).squaredNorm()) q = j;
    for (int j : pred.topology().neighbors(i)) {
      const double d = (x.row(i) - x.row(j)).dot(tn.row(q));
      s += d * d;
      ++count;
    }
  }
  return s / count;
}

double brute_laplacian(const Mesh& m) {
  double s = 0.0;
  for (int i = 0; i < m.vertex_count(); ++i) {
    Eigen::RowVector3d c = Eigen::RowVector3d::Zero();
    for (int j : m.topology().neighbors(i)) c += m.vertices().row(j);
    c /= m.topology().degree(i);
    s += (m.vertices().row(i) - c).squaredNorm();
  }
  return s / m.vertex_count();
}

double brute_edge(const Mesh& m) {
  double s = 0.0;
  for (const auto& e : m.topology().edges()) s += (m.vertices().row(e[0]) - m.vertices().row(e[1])).squaredNorm();
  return s / static_cast<double>(m.topology().edges().size());
}

Tensor points(std::initializer_list<std::array<double, 3>> rows) {
  Tensor t(static_cast<Index>(rows.size()), 3);
  Index i = 0;
  for (const auto& r : rows) t.row(i++) << r[0], r[1], r[2];
  return t;
}

}  // namespace

TEST(Chamfer, Identical) {
  CounterRng rng(1);
  const Tensor a = testutil::random_tensor(20, 3, rng);
  EXPECT_EQ(chamfer_loss(a, a), 0.0);
}

TEST(Chamfer, SinglePair) {
  EXPECT_DOUBLE_EQ(chamfer_loss(points({{0, 0, 0}}), points({{1, 0, 0}})), 2.0);
}

TEST(Chamfer, TwoToOne) {
  EXPECT_DOUBLE_EQ(chamfer_loss(points({{0, 0, 0}, {2, 0, 0}}), points({{1, 0, 0}})), 2.0);
}

TEST(Chamfer, BruteForceOracle) {
  CounterRng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = testutil::random_tensor(1 + rng.below(40), 3, rng);
    const Tensor b = testutil::random_tensor(1 + rng.below(40), 3, rng);
    EXPECT_NEAR(chamfer_loss(a, b), brute_chamfer(a, b, false), 1e-12);
    EXPECT_NEAR(chamfer_loss(a, b, ChamferMetric::kSquared), brute_chamfer(a, b, true), 1e-12);
  }
}

TEST(Chamfer, Gradient) {
  CounterRng rng(3);
  const Tensor a = testutil::random_tensor(15, 3, rng);
  const Tensor b = testutil::random_tensor(12, 3, rng);
  for (auto metric : {ChamferMetric::kEuclidean, ChamferMetric::kSquared}) {
    const Program p = [&](Tape&, std::span<const Var> in) { return ad::chamfer(in[0], in[1], metric); };
    const std::vector<Tensor> inputs{a, b};
    EXPECT_LT(finite_diff_check(p, inputs).max_relative_error, 1e-6);
  }
}

TEST(Chamfer, FixedTreeMatches) {
  CounterRng rng(4);
  const Tensor a = testutil::random_tensor(15, 3, rng);
  const Tensor b = testutil::random_tensor(12, 3, rng);
  Tape tape;
  const KdTree tree(b);
  EXPECT_NEAR(ad::chamfer(tape.watch(a), tree).scalar(), chamfer_loss(a, b), 1e-14);
}

TEST(NormalLoss, TangentEdgeIsZero) {
  const Mesh m(points({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}), build_topology({{0, 1, 2}}, 3));
  EXPECT_NEAR(normal_loss(m, points({{0, 0, 0}}), points({{0, 0, 1}})), 0.0, 1e-15);
}

TEST(NormalLoss, PerpendicularEdge) {
  const Mesh m(points({{0, 0, 0}, {0, 0, 1}, {1, 0, 0}}), build_topology({{0, 1, 2}}, 3));
  const Tensor tv = points({{0, 0, 0}, {0, 0, 1}, {1, 0, 0}});
  const Tensor tn = points({{0, 0, 1}, {0, 0, 1}, {0, 0, 1}});
  EXPECT_NEAR(normal_loss(m, tv, tn), brute_normal(m, tv, tn), 1e-15);
  // vertices 1 and 2 coincide: four of six directed edges are vertical with unit contribution
  const Mesh edge(points({{0, 0, 0}, {0, 0, 1}, {0, 0, 1}}), build_topology({{0, 1, 2}}, 3));
  EXPECT_NEAR(normal_loss(edge, tv, tn), 4.0 / 6.0, 1e-15);
}

TEST(NormalLoss, BruteForceOracle) {
  for (int trial = 0; trial < 5; ++trial) {
    const Mesh m = testutil::bumpy_sphere(1, trial, 0.2);
    const Mesh target = testutil::bumpy_sphere(2, 100 + trial, 0.2);
    const Tensor tn = vertex_normals(target);
    EXPECT_NEAR(normal_loss(m, target.vertices(), tn), brute_normal(m, target.vertices(), tn), 1e-13);
  }
}

TEST(LaplacianLoss, HexagonCenter) {
  Tensor v(7, 3);
  v.row(0).setZero();
  for (int k = 0; k < 6; ++k) v.row(k + 1) << std::cos(k * M_PI / 3), std::sin(k * M_PI / 3), 0.0;
  std::vector<Face> faces;
  for (int k = 0; k < 6; ++k) faces.push_back({0, 1 + k, 1 + (k + 1) % 6});
  const Mesh m(v, build_topology(faces, 7));
  const double base = laplacian_reg_loss(m);
  EXPECT_NEAR(base, brute_laplacian(m), 1e-15);
  Tensor moved = v;
  moved(0, 2) = 0.3;
  // centre term d^2; each rim vertex sees the centre as one of its three neighbors
  const double rim = 6.0 * std::pow(0.3 / 3.0, 2);
  const double rim_before = base * 7;
  EXPECT_NEAR(laplacian_reg_loss(m.with_vertices(moved)), (rim_before + 0.09 + rim) / 7.0, 1e-14);
}

TEST(LaplacianLoss, BruteForceOracle) {
  for (int trial = 0; trial < 5; ++trial) {
    const Mesh m = testutil::bumpy_sphere(2, trial, 0.3);
    EXPECT_NEAR(laplacian_reg_loss(m), brute_laplacian(m), 1e-14);
  }
}

TEST(EdgeLoss, UnitEdges) {
  Tensor v(3, 3);
  v << 0, 0, 0, 1, 0, 0, 0.5, std::sqrt(3.0) / 2, 0;
  EXPECT_NEAR(edge_loss(Mesh(v, build_topology({{0, 1, 2}}, 3))), 1.0, 1e-15);
}

TEST(EdgeLoss, ScalesQuadratically) {
  const Mesh m = testutil::bumpy_sphere(2, 6, 0.2);
  const Mesh scaled = m.with_vertices(2.5 * m.vertices());
  EXPECT_NEAR(edge_loss(scaled), 6.25 * edge_loss(m), 1e-12);
  EXPECT_NEAR(edge_loss(m), brute_edge(m), 1e-14);
}

TEST(RegularizerGradients, FiniteDifference) {
  const Mesh m = testutil::bumpy_sphere(1, 7, 0.2);
  const Mesh target = testutil::bumpy_sphere(2, 8, 0.2);
  const Tensor tn = vertex_normals(target);
  const KdTree tree(target.vertices());
  const auto& topo = m.topology();
  EXPECT_LT(finite_diff_check([&](Tape&, Var x) { return ad::laplacian_reg_loss(x, topo); }, m.vertices())
                .max_relative_error,
            1e-6);
  EXPECT_LT(finite_diff_check([&](Tape&, Var x) { return ad::edge_loss(x, topo); }, m.vertices())
                .max_relative_error,
            1e-6);
  EXPECT_LT(finite_diff_check([&](Tape&, Var x) { return ad::normal_loss(x, topo, tree, tn); }, m.vertices())
                .max_relative_error,
            1e-6);
  Tape tape;
  EXPECT_NEAR(ad::normal_loss(tape.watch(m.vertices()), topo, tree, tn).scalar(),
              normal_loss(m, target.vertices(), tn), 1e-14);
}
