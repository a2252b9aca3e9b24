// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sunet/autograd.hpp"
#include "sunet/ops.hpp"
#include "sunet/rng.hpp"

namespace sunet {

/// Owns every Parameter of a model in registration order. Addresses are
/// stable, so layers keep raw pointers into the store.
class ParameterStore {
 public:
  Parameter& add(std::string name, Shape shape, bool trainable = true);

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);

  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count(bool trainable_only = true) const;

  template <typename F>
  void for_each(F&& f) {
    for (auto& p : params_) f(*p);
  }
  template <typename F>
  void for_each(F&& f) const {
    for (const auto& p : params_) f(static_cast<const Parameter&>(*p));
  }

  void zero_grad();
  // Copies values from `other`; names and shapes must match one-to-one.
  void copy_values_from(const ParameterStore& other);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

// Uniform in [-a, a] with a = sqrt(1 / fan_in).
void init_uniform_fan_in(Parameter& p, std::size_t fan_in, Rng& rng);

struct Conv2d {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;  // null when built without bias
  std::size_t padding = 0;

  Conv2d() = default;
  Conv2d(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
         Rng& rng, bool with_bias = true);
  Var operator()(Tape& tape, const Var& x) const;
};

struct BatchNorm {
  Parameter* gamma = nullptr;
  Parameter* beta = nullptr;
  Parameter* running_mean = nullptr;
  Parameter* running_var = nullptr;

  BatchNorm() = default;
  BatchNorm(ParameterStore& store, const std::string& name, std::size_t channels);
  Var operator()(Tape& tape, const Var& x, bool training) const;
};

struct Linear {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;

  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  Var operator()(Tape& tape, const Var& x) const;
};

/// Weights for one LSTM cell, gates stacked in the order input, forget,
/// candidate, output. `projection` is set only when the cell width differs
/// from the hidden width; the emitted hidden state is then projection *
/// (o * tanh(c)).
struct LstmWeights {
  Var input_weight;   // [4C, I]
  Var hidden_weight;  // [4C, H]
  Var bias;           // [4C]
  Var projection;     // [H, C], optional
};

struct LstmState {
  Var h;
  Var c;
};

// One canonical LSTM step. x[B,I], state.h[B,H], state.c[B,C].
LstmState lstm_step(const Var& x, const LstmState& state, const LstmWeights& w);

struct LstmLayer {
  Parameter* input_weight = nullptr;
  Parameter* hidden_weight = nullptr;
  Parameter* bias = nullptr;
  Parameter* projection = nullptr;
  std::size_t hidden_size = 0;
  std::size_t cell_size = 0;

  LstmLayer() = default;
  LstmLayer(ParameterStore& store, const std::string& name, std::size_t input_size, std::size_t hidden_size,
            std::size_t cell_size, Rng& rng);
  LstmWeights bind(Tape& tape) const;
};

/// Stack of LSTM layers; layer k feeds its hidden state to layer k + 1.
class StackedLstm {
 public:
  StackedLstm() = default;
  StackedLstm(ParameterStore& store, const std::string& name, std::size_t input_size, std::size_t hidden_size,
              std::size_t cell_size, std::size_t layers, Rng& rng);

  std::vector<LstmState> zero_state(Tape& tape, std::size_t batch) const;
  // Advances every layer one step and returns the top layer's hidden state.
  Var step(Tape& tape, const Var& x, std::vector<LstmState>& state) const;

  std::size_t hidden_size() const noexcept { return hidden_size_; }

 private:
  std::vector<LstmLayer> layers_;
  std::size_t hidden_size_ = 0;
};

}  // namespace sunet
