#include "shapecomp/tape.hpp"

#include "shapecomp/errors.hpp"

namespace shapecomp {

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("use of an unbound Var");
  return tape_->value(*this);
}

double Var::scalar() const {
  const Tensor& v = value();
  if (v.size() != 1) throw ContractError("scalar() on a non-scalar Var");
  return v(0, 0);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.primitive = "constant";
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::watch(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  n.watched = true;
  n.primitive = "input";
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(const char* primitive, Tensor value, bool requires_grad, Backward backward) {
  if (!value.allFinite()) {
    throw NumericError(std::string("non-finite value produced by primitive '") + primitive + "'");
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.primitive = primitive;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(Var v, const Tensor& contribution) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return;
  if (contribution.rows() != n.value.rows() || contribution.cols() != n.value.cols()) {
    throw ContractError("gradient shape mismatch in accumulation onto '" + n.primitive + "'");
  }
  if (!n.has_grad) {
    n.grad = contribution;
    n.has_grad = true;
  } else {
    n.grad += contribution;
  }
}

void Tape::backward(Var output) {
  if (output.tape() != this) throw ContractError("backward on a Var from another tape");
  if (backward_done_) throw ContractError("backward called twice on one tape");
  backward_done_ = true;
  Node& out = nodes_[output.id()];
  if (out.value.size() != 1) throw ContractError("backward needs a scalar output");
  if (out.requires_grad) {
    out.grad = Tensor::Ones(1, 1);
    out.has_grad = true;
  }
  for (int id = out.requires_grad ? output.id() : -1; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.has_grad || !n.backward) continue;
    ++backward_visits_;
    const Tensor upstream = n.grad;
    n.backward(upstream, *this);
    if (!n.watched) {
      n.grad.resize(0, 0);
    }
  }
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    Node& n = nodes_[id];
    if (n.watched && !n.has_grad) {
      n.grad = Tensor::Zero(n.value.rows(), n.value.cols());
      n.has_grad = true;
    }
    if (n.watched && !n.grad.allFinite()) {
      throw NumericError("non-finite gradient for a watched input");
    }
  }
}

const Tensor& Tape::gradient(Var v) const {
  const Node& n = nodes_[v.id()];
  if (!n.watched) throw ContractError("gradient requested for an unwatched input");
  if (!n.has_grad) throw ContractError("gradient requested before backward");
  return n.grad;
}

bool Tape::has_gradient(Var v) const {
  const Node& n = nodes_[v.id()];
  return n.watched && n.has_grad;
}

}  // namespace shapecomp
