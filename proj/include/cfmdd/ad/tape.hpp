#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "cfmdd/ad/tensor.hpp"

namespace cfmdd::ad {

class Tape;

/// Handle to a node recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
  bool requires_grad() const;
};

/// Receives the gradient of the node's output and accumulates into the
/// inputs through Tape::accumulate.
using Pullback = std::function<void(Tape&, const Tensor& out_grad)>;

/// Records nodes in creation order; backward walks them in exact reverse.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var param(Tensor value) { return leaf(std::move(value), true); }

  /// Adds an op output. Throws NumericalError when the value holds NaN/Inf.
  Var record(Tensor value, const std::vector<Var>& inputs, Pullback pullback, const char* op);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// grad[v] += g (shapes must agree); no-op for nodes without gradients.
  void accumulate(Var v, const Tensor& g);
  /// Mutable gradient buffer of v, allocated on first use.
  Tensor& grad_buffer(Var v);

  /// Gradients of the scalar `loss` with respect to every recorded node.
  void backward(Var loss);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Pullback pullback;
    bool requires_grad = false;
    const char* op = "leaf";
  };
  std::vector<Node> nodes_;
};

}  // namespace cfmdd::ad
