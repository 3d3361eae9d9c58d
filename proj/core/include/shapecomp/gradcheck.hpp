#pragma once

#include <functional>
#include <span>
#include <vector>

#include "shapecomp/tape.hpp"

namespace shapecomp {

/// A scalar-valued computation over one or more watched inputs.
using Program = std::function<Var(Tape&, std::span<const Var>)>;

struct Evaluation {
  double value = 0.0;
  std::vector<Tensor> gradients;  // one per input
};

/// Records `program` with every input watched and runs the reverse sweep.
Evaluation evaluate_with_gradients(const Program& program, std::span<const Tensor> inputs);

/// Value only; nothing is watched.
double evaluate(const Program& program, std::span<const Tensor> inputs);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::vector<Tensor> analytic;
  std::vector<Tensor> numeric;
};

/// Compares reverse-mode gradients with central differences of step `h`,
/// coordinate by coordinate. The relative error of a coordinate is
/// |a - f| / max(|a|, |f|, 1e-4 * s, 1e-12), where s is the largest
/// gradient magnitude across all inputs; coordinates far below the
/// gradient's scale are thus judged against that scale.
GradCheckResult finite_diff_check(const Program& program, std::span<const Tensor> inputs,
                                  double h = 1e-5);

/// Single-input overload.
GradCheckResult finite_diff_check(const std::function<Var(Tape&, Var)>& program,
                                  const Tensor& input, double h = 1e-5);

}  // namespace shapecomp
