#pragma once

#include <Eigen/Core>

#include "shapecomp/tensor.hpp"

namespace shapecomp {

inline constexpr Index kMaxEigenDimension = 4096;

struct SymmetricEigen {
  Eigen::VectorXd values;  // ascending
  Tensor vectors;          // column k pairs with values[k]
};

/// Dense symmetric eigendecomposition. Each eigenvector's largest-magnitude
/// entry is made positive so the result is reproducible.
/// Throws ContractError if |A - A^T|_max >= 1e-10, BoundError above
/// kMaxEigenDimension, ConvergenceError if the solver fails.
SymmetricEigen symmetric_eig(const Tensor& matrix);

/// Proper rotation R minimizing sum |R a_i + t - b_i|^2 over paired rows
/// (Kabsch with reflection correction). Rows of `a` and `b` must match.
struct RigidFit {
  Mat3 rotation;
  Vec3 translation;
};
RigidFit fit_rigid(const Tensor& a, const Tensor& b);

}  // namespace shapecomp
