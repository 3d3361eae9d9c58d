#pragma once

#include <deque>
#include <functional>
#include <string>

#include "shapecomp/tensor.hpp"

namespace shapecomp {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the
/// tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  /// Value of a 1x1 var.
  double scalar() const;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Records one forward evaluation as a list of nodes in topological order
/// and runs the reverse sweep. Only inputs registered with `watch` receive
/// gradients; constants and anything depending only on constants are never
/// differentiated.
class Tape {
 public:
  using Backward = std::function<void(const Tensor& upstream, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var watch(Tensor value);

  /// Appends a primitive's output. `backward` receives the output gradient
  /// and must call `accumulate` for each parent that requires a gradient.
  /// Throws NumericError naming `primitive` if `value` is not finite.
  Var record(const char* primitive, Tensor value, bool requires_grad, Backward backward);

  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  void accumulate(Var v, const Tensor& contribution);

  /// Reverse sweep from a 1x1 output. Can be called once per tape.
  void backward(Var output);

  /// Gradient of the last backward output with respect to a watched input.
  /// Throws ContractError for unwatched vars.
  const Tensor& gradient(Var v) const;
  bool has_gradient(Var v) const;

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  const std::string& primitive(Var v) const { return nodes_[v.id()].primitive; }
  std::size_t size() const { return nodes_.size(); }
  /// Number of backward closures run by the last reverse sweep.
  std::size_t backward_visits() const { return backward_visits_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    bool watched = false;
    std::string primitive;
    Backward backward;
  };

  std::deque<Node> nodes_;
  bool backward_done_ = false;
  std::size_t backward_visits_ = 0;
};

}  // namespace shapecomp
