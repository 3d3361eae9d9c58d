#pragma once

#include <string>
#include <vector>

namespace shapecomp {

struct GradientCheck {
  std::string component;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Names accepted by `run_gradient_suite`.
std::vector<std::string> gradient_components();

/// Finite-difference checks of every differentiable component, or of one
/// when `component` is not "all". Throws ContractError for unknown names.
std::vector<GradientCheck> run_gradient_suite(const std::string& component = "all");

}  // namespace shapecomp
