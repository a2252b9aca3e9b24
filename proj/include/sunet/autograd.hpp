// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sunet/tensor.hpp"

namespace sunet {

/// A named learnable (or buffer) tensor owned by a ParameterStore. Backward
/// passes accumulate into `grad`; optimizers read it and zero it.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  void zero_grad() { grad.fill(0.0); }
};

class Tape;

/// Lightweight handle to a node recorded on a Tape. Copyable; valid until the
/// tape is cleared.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  // Zero tensor when no gradient reached this node.
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records executed operations in order; backward() walks the record once in
/// reverse, which is a reverse topological order because every node's inputs
/// were recorded before it.
///
/// Lifecycle: record a forward pass, call backward() exactly once, read
/// gradients, then clear() before recording the next pass. A second
/// backward() without clear() throws.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var leaf(Tensor value);
  // Repeated calls with the same parameter return the same node.
  Var param(Parameter& p);

  // Used by ops. `fn` is dropped when no input requires grad.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const Tensor& grad(std::size_t id);
  // Lazily allocated, zero-initialised accumulation buffer for backward fns.
  Tensor& grad_buffer(const Var& v);

  void backward(const Var& loss);
  void clear();

  std::size_t size() const noexcept { return nodes_.size(); }
  bool consumed() const noexcept { return consumed_; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* parameter = nullptr;
  };

  Var push(Node node);
  void check_owned(const Var& v) const;

  std::vector<Node> nodes_;
  std::vector<std::pair<const Parameter*, std::size_t>> param_nodes_;
  bool consumed_ = false;
};

}  // namespace sunet
