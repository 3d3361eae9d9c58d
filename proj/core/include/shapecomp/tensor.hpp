#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace shapecomp {

/// Dense row-major matrix of doubles. Every value that flows through the
/// gradient tape is one of these; vectors are 1xn or nx1.
using Tensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

using Index = Eigen::Index;

}  // namespace shapecomp
