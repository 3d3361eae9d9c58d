#include "shapecomp/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>

#include "shapecomp/errors.hpp"
#include "shapecomp/mesh.hpp"

namespace shapecomp {

SymmetricEigen symmetric_eig(const Tensor& matrix) {
  if (matrix.rows() != matrix.cols()) throw ContractError("symmetric_eig: matrix is not square");
  if (matrix.rows() > kMaxEigenDimension) {
    throw BoundError("symmetric_eig: dimension " + std::to_string(matrix.rows()) + " exceeds " +
                     std::to_string(kMaxEigenDimension));
  }
  const double asym = (matrix - matrix.transpose()).cwiseAbs().maxCoeff();
  if (!(asym < 1e-10)) {
    throw ContractError("symmetric_eig: matrix is not symmetric (max |A - A^T| = " +
                        std::to_string(asym) + ")");
  }
  const Eigen::MatrixXd a = matrix;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw ConvergenceError("symmetric_eig: solver did not converge");

  SymmetricEigen out;
  out.values = solver.eigenvalues();
  out.vectors = solver.eigenvectors();
  for (Index k = 0; k < out.vectors.cols(); ++k) {
    Index arg = 0;
    out.vectors.col(k).cwiseAbs().maxCoeff(&arg);
    if (out.vectors(arg, k) < 0) out.vectors.col(k) *= -1.0;
  }
  return out;
}

RigidFit fit_rigid(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != 3 || b.cols() != 3 || a.rows() == 0) {
    throw ContractError("fit_rigid: need equally sized non-empty n x 3 sets");
  }
  const Vec3 ca = centroid(a);
  const Vec3 cb = centroid(b);
  Mat3 cov = Mat3::Zero();
  for (Index i = 0; i < a.rows(); ++i) {
    cov += (b.row(i).transpose() - cb) * (a.row(i).transpose() - ca).transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2, 2) = -1.0;
  RigidFit fit;
  fit.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  fit.translation = cb - fit.rotation * ca;
  return fit;
}

}  // namespace shapecomp
