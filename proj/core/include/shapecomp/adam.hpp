#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "shapecomp/tensor.hpp"

namespace shapecomp {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam over a fixed list of parameter tensors.
class AdamState {
 public:
  AdamState(AdamConfig config, std::span<const Tensor* const> params);
  /// Single-tensor convenience.
  AdamState(AdamConfig config, const Tensor& param);

  /// Updates `params` in place. Shapes must match those seen at construction.
  void step(std::span<Tensor* const> params, std::span<const Tensor* const> grads);
  void step(Tensor& param, const Tensor& grad);

  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<Tensor>& first_moment() const { return m_; }
  const std::vector<Tensor>& second_moment() const { return v_; }

 private:
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::int64_t t_ = 0;
};

}  // namespace shapecomp
