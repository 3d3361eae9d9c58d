#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include "shapecomp/errors.hpp"
#include "shapecomp/linalg.hpp"
#include "testutil.hpp"

using namespace shapecomp;

TEST(SymmetricEig, Diagonal) {
  Tensor a = Tensor::Zero(3, 3);
  a.diagonal() << 3, 1, 2;
  const auto e = symmetric_eig(a);
  EXPECT_NEAR(e.values(0), 1, 1e-14);
  EXPECT_NEAR(e.values(1), 2, 1e-14);
  EXPECT_NEAR(e.values(2), 3, 1e-14);
  EXPECT_NEAR(e.vectors(1, 0), 1, 1e-14);
  EXPECT_NEAR(e.vectors(2, 1), 1, 1e-14);
  EXPECT_NEAR(e.vectors(0, 2), 1, 1e-14);
}

TEST(SymmetricEig, PathGraph) {
  Tensor a(2, 2);
  a << 1, -1, -1, 1;
  const auto e = symmetric_eig(a);
  EXPECT_NEAR(e.values(0), 0, 1e-14);
  EXPECT_NEAR(e.values(1), 2, 1e-14);
}

TEST(SymmetricEig, RandomReconstruction) {
  CounterRng rng(5);
  const Tensor b = testutil::random_tensor(50, 50, rng);
  const Tensor a = b + b.transpose();
  const auto e = symmetric_eig(a);
  const Tensor rec = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
  EXPECT_LT((rec - a).cwiseAbs().maxCoeff(), 1e-10);
  const Tensor gram = e.vectors.transpose() * e.vectors;
  EXPECT_LT((gram - Tensor::Identity(50, 50)).cwiseAbs().maxCoeff(), 1e-12);
  for (int k = 0; k < 50; ++k) {
    Index i;
    e.vectors.col(k).cwiseAbs().maxCoeff(&i);
    EXPECT_GT(e.vectors(i, k), 0.0);
  }
}

TEST(SymmetricEig, RejectsAsymmetric) {
  Tensor a(2, 2);
  a << 1, 2, 3, 4;
  EXPECT_THROW(symmetric_eig(a), ContractError);
}

TEST(SymmetricEig, Bound) {
  EXPECT_THROW(symmetric_eig(Tensor::Zero(kMaxEigenDimension + 1, kMaxEigenDimension + 1)), BoundError);
}

TEST(FitRigid, RecoversTransform) {
  CounterRng rng(6);
  const Tensor a = testutil::random_tensor(30, 3, rng);
  const Mat3 r = Eigen::AngleAxisd(0.8, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  const Vec3 t(0.5, -1, 2);
  const Tensor b = ((a * r.transpose()).rowwise() + t.transpose()).eval();
  const auto fit = fit_rigid(a, b);
  EXPECT_LT((fit.rotation - r).norm(), 1e-10);
  EXPECT_LT((fit.translation - t).norm(), 1e-10);
}

TEST(FitRigid, ReflectionCorrected) {
  CounterRng rng(7);
  Tensor a = testutil::random_tensor(20, 3, rng);
  a.col(2).setZero();
  Tensor b = a;
  b.col(0) *= -1;
  const auto fit = fit_rigid(a, b);
  EXPECT_NEAR(fit.rotation.determinant(), 1.0, 1e-12);
}
