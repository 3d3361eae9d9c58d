#include "shapecomp/adam.hpp"

#include <array>
#include <cmath>

#include "shapecomp/errors.hpp"

namespace shapecomp {

AdamState::AdamState(AdamConfig config, std::span<const Tensor* const> params) : config_(config) {
  if (!(config_.learning_rate > 0)) throw ContractError("Adam learning rate must be positive");
  for (const Tensor* p : params) {
    m_.push_back(Tensor::Zero(p->rows(), p->cols()));
    v_.push_back(Tensor::Zero(p->rows(), p->cols()));
  }
}

AdamState::AdamState(AdamConfig config, const Tensor& param)
    : AdamState(config, std::span<const Tensor* const>(std::array<const Tensor*, 1>{&param})) {}

void AdamState::step(std::span<Tensor* const> params, std::span<const Tensor* const> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ContractError("Adam: parameter count mismatch");
  }
  for (std::size_t k = 0; k < m_.size(); ++k) {
    if (params[k]->rows() != m_[k].rows() || params[k]->cols() != m_[k].cols() ||
        grads[k]->rows() != m_[k].rows() || grads[k]->cols() != m_[k].cols()) {
      throw ContractError("Adam: shape mismatch for parameter " + std::to_string(k));
    }
  }
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < m_.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = *grads[k];
    double* m = m_[k].data();
    double* v = v_[k].data();
    double* x = p.data();
    const double* gr = g.data();
    for (Index i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * gr[i];
      v[i] = b2 * v[i] + (1.0 - b2) * gr[i] * gr[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      x[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

void AdamState::step(Tensor& param, const Tensor& grad) {
  Tensor* p[1] = {&param};
  const Tensor* g[1] = {&grad};
  step(std::span<Tensor* const>(p), std::span<const Tensor* const>(g));
}

}  // namespace shapecomp
