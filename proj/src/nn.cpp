// SPDX-License-Identifier: Apache-2.0
#include "sunet/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "sunet/errors.hpp"

namespace sunet {

Parameter& ParameterStore::add(std::string name, Shape shape, bool trainable) {
  if (find(name) != nullptr) throw std::logic_error("duplicate parameter name " + name);
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->value = Tensor(shape, 0.0);
  p->grad = Tensor(std::move(shape), 0.0);
  p->trainable = trainable;
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterStore::find(const std::string& name) {
  for (auto& p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  return const_cast<ParameterStore*>(this)->find(name);
}

Parameter& ParameterStore::at(const std::string& name) {
  Parameter* p = find(name);
  if (p == nullptr) throw std::out_of_range("no parameter named " + name);
  return *p;
}

std::size_t ParameterStore::scalar_count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& p : params_) {
    if (!trainable_only || p->trainable) n += p->value.size();
  }
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
  if (other.params_.size() != params_.size()) throw std::logic_error("parameter stores differ in size");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Parameter& src = *other.params_[i];
    Parameter& dst = *params_[i];
    if (src.name != dst.name || src.value.shape() != dst.value.shape()) {
      throw std::logic_error("parameter mismatch: " + src.name + " vs " + dst.name);
    }
    dst.value = src.value;
  }
}

void init_uniform_fan_in(Parameter& p, std::size_t fan_in, Rng& rng) {
  const double a = std::sqrt(1.0 / static_cast<double>(fan_in));
  for (double& v : p.value.values()) v = rng.uniform(-a, a);
}

Conv2d::Conv2d(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
               Rng& rng, bool with_bias)
    : padding(kernel / 2) {
  weight = &store.add(name + ".weight", Shape{out, in, kernel, kernel});
  const std::size_t fan_in = in * kernel * kernel;
  init_uniform_fan_in(*weight, fan_in, rng);
  if (with_bias) {
    bias = &store.add(name + ".bias", Shape{out});
    init_uniform_fan_in(*bias, fan_in, rng);
  }
}

Var Conv2d::operator()(Tape& tape, const Var& x) const {
  ops::Conv2dOptions opts;
  opts.padding = {padding, padding};
  return ops::conv2d(x, tape.param(*weight), bias ? tape.param(*bias) : Var{}, opts);
}

BatchNorm::BatchNorm(ParameterStore& store, const std::string& name, std::size_t channels) {
  gamma = &store.add(name + ".gamma", Shape{channels});
  beta = &store.add(name + ".beta", Shape{channels});
  running_mean = &store.add(name + ".running_mean", Shape{channels}, false);
  running_var = &store.add(name + ".running_var", Shape{channels}, false);
  gamma->value.fill(1.0);
  running_var->value.fill(1.0);
}

Var BatchNorm::operator()(Tape& tape, const Var& x, bool training) const {
  ops::BatchNormOptions opts;
  opts.training = training;
  return ops::batch_norm(x, tape.param(*gamma), tape.param(*beta), running_mean->value, running_var->value, opts);
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  weight = &store.add(name + ".weight", Shape{out, in});
  bias = &store.add(name + ".bias", Shape{out});
  init_uniform_fan_in(*weight, in, rng);
  init_uniform_fan_in(*bias, in, rng);
}

Var Linear::operator()(Tape& tape, const Var& x) const {
  return ops::linear(x, tape.param(*weight), tape.param(*bias));
}

LstmState lstm_step(const Var& x, const LstmState& state, const LstmWeights& w) {
  const Shape& bias_shape = w.bias.shape();
  if (bias_shape.size() != 1 || bias_shape[0] % 4 != 0) {
    throw ShapeError("lstm_step: gate bias must be [4C], got " + shape_string(bias_shape));
  }
  const std::size_t cell = bias_shape[0] / 4;
  if (state.c.shape() != Shape{x.shape().at(0), cell} || state.h.shape().at(0) != x.shape()[0]) {
    throw ShapeError("lstm_step: input " + shape_string(x.shape()) + ", h " + shape_string(state.h.shape()) +
                     ", c " + shape_string(state.c.shape()) + " inconsistent with cell width " +
                     std::to_string(cell));
  }
  const Var gates = ops::add(ops::linear(x, w.input_weight, w.bias), ops::linear(state.h, w.hidden_weight, Var{}));
  const Var i = ops::sigmoid(ops::narrow(gates, 1, 0, cell));
  const Var f = ops::sigmoid(ops::narrow(gates, 1, cell, cell));
  const Var g = ops::tanh(ops::narrow(gates, 1, 2 * cell, cell));
  const Var o = ops::sigmoid(ops::narrow(gates, 1, 3 * cell, cell));
  const Var c_next = ops::add(ops::mul(f, state.c), ops::mul(i, g));
  Var h_next = ops::mul(o, ops::tanh(c_next));
  if (w.projection.valid()) h_next = ops::linear(h_next, w.projection, Var{});
  return {h_next, c_next};
}

LstmLayer::LstmLayer(ParameterStore& store, const std::string& name, std::size_t input_size, std::size_t hidden,
                     std::size_t cell, Rng& rng)
    : hidden_size(hidden), cell_size(cell) {
  input_weight = &store.add(name + ".w_ih", Shape{4 * cell, input_size});
  hidden_weight = &store.add(name + ".w_hh", Shape{4 * cell, hidden});
  bias = &store.add(name + ".bias", Shape{4 * cell});
  init_uniform_fan_in(*input_weight, hidden, rng);
  init_uniform_fan_in(*hidden_weight, hidden, rng);
  init_uniform_fan_in(*bias, hidden, rng);
  if (cell != hidden) {
    projection = &store.add(name + ".w_proj", Shape{hidden, cell});
    init_uniform_fan_in(*projection, cell, rng);
  }
}

LstmWeights LstmLayer::bind(Tape& tape) const {
  LstmWeights w;
  w.input_weight = tape.param(*input_weight);
  w.hidden_weight = tape.param(*hidden_weight);
  w.bias = tape.param(*bias);
  if (projection != nullptr) w.projection = tape.param(*projection);
  return w;
}

StackedLstm::StackedLstm(ParameterStore& store, const std::string& name, std::size_t input_size,
                         std::size_t hidden_size, std::size_t cell_size, std::size_t layers, Rng& rng)
    : hidden_size_(hidden_size) {
  if (layers == 0) throw ConfigError("LSTM needs at least one layer");
  for (std::size_t k = 0; k < layers; ++k) {
    layers_.emplace_back(store, name + ".l" + std::to_string(k), k == 0 ? input_size : hidden_size, hidden_size,
                         cell_size, rng);
  }
}

std::vector<LstmState> StackedLstm::zero_state(Tape& tape, std::size_t batch) const {
  std::vector<LstmState> state;
  for (const LstmLayer& layer : layers_) {
    state.push_back({tape.constant(Tensor(Shape{batch, layer.hidden_size}, 0.0)),
                     tape.constant(Tensor(Shape{batch, layer.cell_size}, 0.0))});
  }
  return state;
}

Var StackedLstm::step(Tape& tape, const Var& x, std::vector<LstmState>& state) const {
  Var input = x;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    state[k] = lstm_step(input, state[k], layers_[k].bind(tape));
    input = state[k].h;
  }
  return input;
}

}  // namespace sunet
