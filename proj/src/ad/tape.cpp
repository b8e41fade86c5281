#include "cfmdd/ad/tape.hpp"

#include "cfmdd/errors.hpp"

namespace cfmdd::ad {

const Tensor& Var::value() const { return tape->value(id); }
const Tensor& Var::grad() const { return tape->grad(id); }
bool Var::requires_grad() const { return tape->requires_grad(id); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw NumericalError("non-finite value in leaf tensor");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, Pullback pullback,
                 const char* op) {
  if (!value.all_finite()) {
    throw NumericalError(std::string("non-finite output from ") + op + " " + value.shape_str());
  }
  Node n;
  n.value = std::move(value);
  n.op = op;
  for (const auto& in : inputs) {
    if (in.tape != this) throw InvalidInputError(std::string(op) + ": input from another tape");
    n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
  }
  if (n.requires_grad) n.pullback = std::move(pullback);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Tensor& Tape::grad_buffer(Var v) {
  auto& n = nodes_[v.id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor::zeros_like(n.value);
  return n.grad;
}

void Tape::accumulate(Var v, const Tensor& g) {
  auto& n = nodes_[v.id];
  if (!n.requires_grad) return;
  if (!g.same_shape(n.value)) {
    throw ShapeError(std::string("gradient shape ") + g.shape_str() + " does not match " +
                     n.value.shape_str() + " of " + n.op);
  }
  Tensor& buf = grad_buffer(v);
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw InvalidInputError("backward: loss from another tape");
  if (nodes_[loss.id].value.size() != 1) {
    throw ShapeError("backward needs a scalar loss, got " + nodes_[loss.id].value.shape_str());
  }
  for (auto& n : nodes_) n.grad = Tensor();
  if (!nodes_[loss.id].requires_grad) return;
  grad_buffer(loss)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.pullback) continue;
    n.pullback(*this, n.grad);
  }
}

}  // namespace cfmdd::ad
