#pragma once

#include <span>
#include <vector>

#include "shapecomp/tape.hpp"

namespace shapecomp {

class Topology;

/// Row-wise softmax with max subtraction.
Tensor softmax(const Tensor& values);

/// Differentiable primitives. All operands must live on the same tape.
namespace ad {

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product of equal shapes.
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// a (n x c) plus a 1 x c row broadcast over all rows.
Var add_row(Var a, Var row);
/// a (n x c) times an n x 1 column broadcast over all columns.
Var mul_col(Var a, Var column);
Var leaky_relu(Var a, double slope);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var softmax_rows(Var a);
/// 1x1 sum of all entries.
Var sum(Var a);
/// 1x1 mean of all entries.
Var mean(Var a);
/// n x 1 column of row sums.
Var row_sum(Var a);
Var gather_rows(Var a, std::span<const int> rows);
/// Reinterprets the row-major buffer with a new shape of equal size.
Var reshape(Var a, Index rows, Index cols);
Var slice_cols(Var a, Index begin, Index count);
/// 1x1 maximum entry; the gradient flows to the first maximal entry.
Var max_element(Var a);
/// Row i of the result is the mean of rows N_i (1-ring) of `a`. `a` may
/// stack several meshes over the same topology (rows = k * N).
Var neighbor_mean(Var a, const Topology& topology);

struct BatchNormStats {
  Tensor mean;      // 1 x c
  Tensor variance;  // 1 x c, unbiased
};

/// Per-column normalization. In training mode uses the batch statistics and
/// reports them through `batch_stats`; otherwise uses the running values.
Var batch_norm(Var x, Var gamma, Var beta, const Tensor& running_mean,
               const Tensor& running_var, bool training, double epsilon,
               BatchNormStats* batch_stats);

}  // namespace ad
}  // namespace shapecomp
