#pragma once

#include "shapecomp/mesh.hpp"
#include "shapecomp/spatial.hpp"
#include "shapecomp/tape.hpp"

namespace shapecomp {

/// Per-point distance used inside the Chamfer sum.
enum class ChamferMetric {
  kEuclidean,  // |a - b|
  kSquared,    // |a - b|^2
};

/// Symmetric Chamfer distance
///   mean_a min_b d(a, b) + mean_b min_a d(a, b)
/// Closest points are always found by Euclidean distance.
double chamfer_loss(const Tensor& a, const Tensor& b,
                    ChamferMetric metric = ChamferMetric::kEuclidean);

/// Mean over directed edges (i, j) of <x_i - x_j, n_q(i)>^2, where q(i) is
/// the target vertex closest to x_i.
double normal_loss(const Mesh& pred, const Tensor& target_vertices, const Tensor& target_normals);

/// Mean over vertices of |x_i - mean_{j in N_i} x_j|^2 (uniform umbrella).
double laplacian_reg_loss(const Mesh& pred);

/// Mean over edges of |x_i - x_j|^2.
double edge_loss(const Mesh& pred);

namespace ad {

/// Chamfer distance with closest-point assignments frozen in the backward
/// pass. Either operand may be constant. For the Euclidean metric the
/// gradient of a coincident pair is taken as zero.
Var chamfer(Var a, Var b, ChamferMetric metric = ChamferMetric::kEuclidean);
/// Chamfer against a fixed point set with a prebuilt tree.
Var chamfer(Var a, const KdTree& fixed, ChamferMetric metric = ChamferMetric::kEuclidean);

Var normal_loss(Var pred, const Topology& topology, const KdTree& target,
                const Tensor& target_normals);
Var laplacian_reg_loss(Var pred, const Topology& topology);
Var edge_loss(Var pred, const Topology& topology);

}  // namespace ad
}  // namespace shapecomp
