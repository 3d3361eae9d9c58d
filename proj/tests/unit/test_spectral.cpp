#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include "shapecomp/errors.hpp"
#include "shapecomp/spectral.hpp"
#include "testutil.hpp"

using namespace shapecomp;

namespace {

PerturbationSpec identity_spec() {
  PerturbationSpec s;
  s.low_min = s.low_max = s.high_min = s.high_max = 1.0;
  return s;
}

}  // namespace

TEST(Laplacian, Triangle) {
  const auto t = build_topology({{0, 1, 2}}, 3);
  Tensor expected(3, 3);
  expected << 2, -1, -1, -1, 2, -1, -1, -1, 2;
  EXPECT_EQ(graph_laplacian(*t), expected);
}

TEST(Laplacian, IcosahedronDiagonal) {
  const Tensor l = graph_laplacian(icosphere(0).topology());
  for (int i = 0; i < 12; ++i) EXPECT_EQ(l(i, i), 5.0);
  EXPECT_NEAR(l.rowwise().sum().cwiseAbs().maxCoeff(), 0.0, 0.0);
}

TEST(Laplacian, DisconnectedRejected) {
  EXPECT_THROW(graph_laplacian(*build_topology({{0, 1, 2}, {3, 4, 5}}, 6)), StructureError);
}

TEST(Basis, SpectrumStartsAtZero) {
  const auto b = compute_spectral_basis(icosphere(2).topology());
  EXPECT_NEAR(b.eigenvalues[0], 0.0, 1e-10);
  EXPECT_GT(b.eigenvalues[1], 1e-6);
  for (int i = 1; i < b.eigenvalues.size(); ++i) EXPECT_LE(b.eigenvalues[i - 1], b.eigenvalues[i]);
}

TEST(Fourier, RoundTripLevelThree) {
  const Mesh m = testutil::bumpy_sphere(3, 1, 0.1);
  const auto b = spectral_basis(m.topology());
  const Mesh back = inverse_fourier(fourier(m, *b), *b, m.topology_ptr());
  EXPECT_LT(max_row_distance(back.vertices(), m.vertices()), 1e-9);
}

TEST(Fourier, DcRowIsCentroid) {
  const Mesh m = centroid_center(testutil::bumpy_sphere(2, 2, 0.2)).first;
  const auto b = spectral_basis(m.topology());
  EXPECT_LT(fourier(m, *b).row(0).norm(), 1e-9);
}

TEST(Fourier, TranslationOnlyChangesDc) {
  const Mesh m = testutil::bumpy_sphere(2, 3, 0.2);
  const auto b = spectral_basis(m.topology());
  const Mesh moved = m.with_vertices((m.vertices().rowwise() + Eigen::RowVector3d(1, -2, 3)).eval());
  const Tensor d = fourier(moved, *b) - fourier(m, *b);
  EXPECT_GT(d.row(0).norm(), 1.0);
  EXPECT_LT(d.bottomRows(d.rows() - 1).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Fourier, FingerprintMismatch) {
  const auto b = spectral_basis(icosphere(1).topology());
  EXPECT_THROW(fourier(icosphere(2), *b), TopologyError);
}

TEST(Cache, SecondCallFast) {
  SpectralBasisCache cache;
  const Mesh m = icosphere(3);
  const auto t0 = std::chrono::steady_clock::now();
  const auto a = cache.get(m.topology());
  const auto t1 = std::chrono::steady_clock::now();
  const auto b = cache.get(m.topology());
  const auto t2 = std::chrono::steady_clock::now();
  EXPECT_EQ(a.get(), b.get());
  EXPECT_LT((t2 - t1).count(), 0.01 * (t1 - t0).count());
  EXPECT_EQ(cache.size(), 1u);
}

TEST(Cache, ConcurrentRequestsComputeOnce) {
  SpectralBasisCache cache;
  const Mesh m = icosphere(2);
  std::vector<std::shared_ptr<const SpectralBasis>> got(4);
  std::vector<std::thread> threads;
  for (int i = 0; i < 4; ++i) threads.emplace_back([&, i] { got[i] = cache.get(m.topology()); });
  for (auto& t : threads) t.join();
  for (int i = 1; i < 4; ++i) EXPECT_EQ(got[i].get(), got[0].get());
}

TEST(Perturbation, IndicesFollowRules) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    PerturbationSpec spec;
    spec.seed = s;
    const auto p = draw_perturbation(spec, 162);
    EXPECT_GE(p.indices[0], 1);
    EXPECT_LE(p.indices[0], 3);
    for (int k = 1; k < 4; ++k) {
      EXPECT_GE(p.indices[k], 4);
      EXPECT_LE(p.indices[k], 161);
      EXPECT_GE(p.multipliers[k], 0.5);
      EXPECT_LT(p.multipliers[k], 1.5);
    }
    EXPECT_NE(p.indices[1], p.indices[2]);
    EXPECT_NE(p.indices[1], p.indices[3]);
    EXPECT_NE(p.indices[2], p.indices[3]);
    EXPECT_GE(p.multipliers[0], 0.7);
    EXPECT_LT(p.multipliers[0], 1.3);
  }
}

TEST(Perturbation, InvalidSpecs) {
  PerturbationSpec s;
  s.low_index = 4;
  EXPECT_THROW(draw_perturbation(s, 100), ContractError);
  s = {};
  s.high_min = 2.0;
  EXPECT_THROW(draw_perturbation(s, 100), ContractError);
  EXPECT_THROW(draw_perturbation({}, 6), ContractError);
}

TEST(Augment, IdentityMultipliers) {
  const Mesh m = testutil::bumpy_sphere(2, 4, 0.2);
  const Mesh out = spectral_augment(m, *spectral_basis(m.topology()), identity_spec());
  EXPECT_LT(max_row_distance(out.vertices(), m.vertices()), 1e-9);
}

TEST(Augment, CenteredStaysCentered) {
  const Mesh m = centroid_center(testutil::bumpy_sphere(2, 5, 0.2)).first;
  for (std::uint64_t s = 0; s < 10; ++s) {
    PerturbationSpec spec;
    spec.seed = s;
    const Mesh out = spectral_augment(m, *spectral_basis(m.topology()), spec);
    EXPECT_LT(centroid(out.vertices()).norm(), 1e-9);
  }
}

TEST(Augment, Deterministic) {
  const Mesh m = icosphere(2);
  PerturbationSpec spec;
  spec.seed = 77;
  const auto b = spectral_basis(m.topology());
  EXPECT_EQ(spectral_augment(m, *b, spec).vertices(), spectral_augment(m, *b, spec).vertices());
}

TEST(Augment, CachedEqualsUncached) {
  const Mesh m = icosphere(2);
  PerturbationSpec spec;
  spec.seed = 9;
  EXPECT_EQ(spectral_augment(m, *spectral_basis(m.topology()), spec).vertices(),
            spectral_augment_uncached(m, spec).vertices());
}

TEST(Population, Empty) {
  EXPECT_TRUE(synth_population(icosphere(1), 0, {}, 1).empty());
}

TEST(Population, DistinctAndReproducible) {
  const Mesh base = icosphere(3);
  const auto pop = synth_population(base, 100, {}, 5);
  ASSERT_EQ(pop.size(), 100u);
  for (std::size_t i = 0; i < pop.size(); ++i) {
    EXPECT_EQ(pop[i].fingerprint(), base.fingerprint());
    for (std::size_t j = 0; j < i; ++j) EXPECT_GT(max_row_distance(pop[i].vertices(), pop[j].vertices()), 0.0);
  }
  const auto again = synth_population(base, 100, {}, 5);
  for (std::size_t i = 0; i < pop.size(); ++i) EXPECT_EQ(pop[i].vertices(), again[i].vertices());
}

TEST(Population, NegativeCount) {
  EXPECT_THROW(synth_population(icosphere(1), -1, {}, 1), ContractError);
}
