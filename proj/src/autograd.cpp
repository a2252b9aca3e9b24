// SPDX-License-Identifier: Apache-2.0
#include "sunet/autograd.hpp"

#include "sunet/errors.hpp"

namespace sunet {

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::push(Node node) {
  if (consumed_) throw std::logic_error("tape already consumed by backward(); call clear() first");
  if (!node.value.all_finite()) {
    throw NumericalError("non-finite value produced at tape node " + std::to_string(nodes_.size()) + " (shape " +
                         shape_string(node.value.shape()) + ")");
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(const Var& v) const {
  if (&v.tape() != this || v.id() >= nodes_.size()) throw std::logic_error("variable belongs to another tape");
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  for (const auto& [ptr, id] : param_nodes_) {
    if (ptr == &p) return Var(this, id);
  }
  Node n;
  n.value = p.value;
  n.requires_grad = p.trainable;
  n.parameter = p.trainable ? &p : nullptr;
  Var v = push(std::move(n));
  param_nodes_.emplace_back(&p, v.id());
  return v;
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(fn));
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (const Var& in : inputs) {
    check_owned(in);
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

const Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

Tensor& Tape::grad_buffer(const Var& v) {
  Node& n = nodes_[v.id()];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Tape::backward(const Var& loss) {
  check_owned(loss);
  if (consumed_) throw std::logic_error("backward() called twice on the same recorded pass");
  const Node& root = nodes_[loss.id()];
  if (root.value.size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + shape_string(root.value.shape()));
  }
  consumed_ = true;
  if (!root.requires_grad) return;
  grad_buffer(loss).fill(1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) {
      // Closures only write to input nodes, which precede this one, and
      // nothing is pushed during backward, so the reference stays valid.
      n.backward(*this, n.grad);
    }
    if (n.parameter != nullptr) {
      if (n.parameter->grad.empty()) n.parameter->grad = Tensor(n.parameter->value.shape(), 0.0);
      n.parameter->grad += n.grad;
    }
  }
}

void Tape::clear() {
  nodes_.clear();
  param_nodes_.clear();
  consumed_ = false;
}

}  // namespace sunet
