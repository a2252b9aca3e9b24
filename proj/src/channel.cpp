// SPDX-License-Identifier: Apache-2.0
#include "sunet/channel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sunet/errors.hpp"

namespace sunet {
namespace {

constexpr double kProbabilityFloor = 1e-12;

std::size_t argmax_row(const Tensor& t, std::size_t row, std::size_t width) {
  const double* p = t.data() + row * width;
  return static_cast<std::size_t>(std::max_element(p, p + width) - p);
}

void check_tau(double tau) {
  if (!(tau > 0.0)) throw ConfigError("Gumbel-Softmax temperature must be > 0, got " + std::to_string(tau));
}

}  // namespace

std::string to_string(ChannelMode mode) { return mode == ChannelMode::Train ? "train" : "infer"; }

void ChannelConfig::validate() const {
  if (sentence_length < 1) throw ConfigError("sentence_length must be >= 1");
  if (vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
  if (hidden_size < 1 || cell_size < 1 || embedding_dim < 1 || receiver_channels < 1) {
    throw ConfigError("channel widths must be >= 1");
  }
  if (num_lstm_layers < 1) throw ConfigError("num_lstm_layers must be >= 1");
  check_tau(temperature);
  if (!std::isfinite(fusion_gamma_init) || !std::isfinite(fusion_beta_init)) {
    throw ConfigError("fusion batch-norm init must be finite");
  }
}

std::vector<double> gumbel_softmax(std::span<const double> p, double tau, std::span<const double> gumbel) {
  check_tau(tau);
  if (p.size() != gumbel.size() || p.empty()) throw ShapeError("gumbel_softmax: p and g must have equal nonzero length");
  std::vector<double> z(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) z[i] = (std::log(std::max(p[i], kProbabilityFloor)) + gumbel[i]) / tau;
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0;
  for (double& v : z) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : z) v /= total;
  return z;
}

Var gumbel_softmax(const Var& p, double tau, const Tensor& gumbel) {
  check_tau(tau);
  if (p.shape().size() != 2) throw ShapeError("gumbel_softmax: expected [N,K], got " + shape_string(p.shape()));
  Var perturbed = ops::add_constant(ops::log(ops::clamp_min(p, kProbabilityFloor)), gumbel);
  return ops::softmax(ops::scale(perturbed, 1.0 / tau), 1);
}

Sender::Sender(ParameterStore& store, const ChannelConfig& config, std::size_t feature_channels,
               std::size_t feature_area, Rng& rng)
    : config_(config), feature_channels_(feature_channels), feature_area_(feature_area) {
  config_.validate();
  const std::size_t in =
      config_.sender_input == SenderInput::Pool ? feature_channels : feature_channels * feature_area;
  input_ = Linear(store, "sender.input", in, config_.embedding_dim, rng);
  embedding_ = &store.add("sender.embedding", Shape{config_.vocab_size, config_.embedding_dim});
  init_uniform_fan_in(*embedding_, config_.embedding_dim, rng);
  lstm_ = StackedLstm(store, "sender.lstm", config_.embedding_dim, config_.hidden_size, config_.cell_size,
                      config_.num_lstm_layers, rng);
  vocab_head_ = Linear(store, "sender.vocab", config_.hidden_size, config_.vocab_size - 1, rng);
}

SenderOutput Sender::forward(Tape& tape, const Var& x, ChannelMode mode, Rng* rng, double tau) const {
  const Shape& s = x.shape();
  if (s.size() != 4 || s[1] != feature_channels_) {
    throw ShapeError("sender expects x[N," + std::to_string(feature_channels_) + ",H,W], got " + shape_string(s));
  }
  if (config_.sender_input == SenderInput::Flatten && s[2] * s[3] != feature_area_) {
    throw ShapeError("flattening sender built for " + std::to_string(feature_area_) + " pixels, got " +
                     shape_string(s));
  }
  if (mode == ChannelMode::Train && rng == nullptr) {
    throw std::invalid_argument("train-mode sender needs a seeded rng stream");
  }
  check_tau(tau);

  const std::size_t batch = s[0];
  const std::size_t vocab = config_.vocab_size;
  const std::size_t content = vocab - 1;

  Var features = config_.sender_input == SenderInput::Pool
                     ? ops::global_avg_pool(x)
                     : ops::reshape(x, Shape{batch, s[1] * s[2] * s[3]});
  auto state = lstm_.zero_state(tape, batch);
  lstm_.step(tape, input_(tape, features), state);

  const Var embedding = tape.param(*embedding_);
  Tensor start(Shape{batch, vocab}, 0.0);
  for (std::size_t n = 0; n < batch; ++n) start[n * vocab + kStartToken] = 1.0;
  Var top = lstm_.step(tape, ops::matmul(tape.constant(std::move(start)), embedding), state);

  SenderOutput out;
  out.sentences.resize(batch);
  const Var start_column = tape.constant(Tensor(Shape{batch, 1}, 0.0));
  for (std::size_t step = 0; step < config_.sentence_length; ++step) {
    const Var p = ops::softmax(vocab_head_(tape, top), 1);
    Var symbol;
    if (mode == ChannelMode::Train) {
      Tensor g(Shape{batch, content});
      for (double& v : g.values()) v = rng->gumbel();
      Var y = gumbel_softmax(p, tau, g);
      if (config_.straight_through) y = ops::straight_through(y);
      symbol = ops::concat({start_column, y}, 1);
      for (std::size_t n = 0; n < batch; ++n) {
        out.sentences[n].ids.push_back(static_cast<int>(argmax_row(y.value(), n, content) + 1));
        const double* row = symbol.value().data() + n * vocab;
        out.sentences[n].relaxed.emplace_back(row, row + vocab);
      }
    } else {
      Tensor one_hot(Shape{batch, vocab}, 0.0);
      for (std::size_t n = 0; n < batch; ++n) {
        const std::size_t id = argmax_row(p.value(), n, content) + 1;
        one_hot[n * vocab + id] = 1.0;
        out.sentences[n].ids.push_back(static_cast<int>(id));
      }
      symbol = tape.constant(std::move(one_hot));
    }
    out.symbols.push_back(symbol);
    top = lstm_.step(tape, ops::matmul(symbol, embedding), state);
  }
  out.h_last = top;
  return out;
}

Receiver::Receiver(ParameterStore& store, const ChannelConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  embedding_ = &store.add("receiver.embedding", Shape{config_.vocab_size, config_.embedding_dim});
  init_uniform_fan_in(*embedding_, config_.embedding_dim, rng);
  lstm_ = StackedLstm(store, "receiver.lstm", config_.embedding_dim, config_.hidden_size, config_.cell_size, 1, rng);
  output_ = Linear(store, "receiver.output", config_.hidden_size, config_.receiver_channels, rng);
}

Var Receiver::forward(Tape& tape, const std::vector<Var>& symbols) const {
  if (symbols.size() != config_.sentence_length) {
    throw ShapeError("receiver expects sentences of length " + std::to_string(config_.sentence_length) + ", got " +
                     std::to_string(symbols.size()));
  }
  const std::size_t batch = symbols.front().shape().at(0);
  const Var embedding = tape.param(*embedding_);
  auto state = lstm_.zero_state(tape, batch);
  Var h;
  for (const Var& sym : symbols) {
    if (sym.shape() != Shape{batch, config_.vocab_size}) {
      throw ShapeError("receiver symbol must be [" + std::to_string(batch) + "," +
                       std::to_string(config_.vocab_size) + "], got " + shape_string(sym.shape()));
    }
    h = lstm_.step(tape, ops::matmul(sym, embedding), state);
  }
  return output_(tape, h);
}

Var Receiver::forward(Tape& tape, std::span<const Sentence> sentences) const {
  if (sentences.empty()) throw ShapeError("receiver: empty batch");
  const std::size_t vocab = config_.vocab_size;
  std::vector<Var> symbols;
  for (std::size_t step = 0; step < config_.sentence_length; ++step) {
    Tensor t(Shape{sentences.size(), vocab}, 0.0);
    for (std::size_t n = 0; n < sentences.size(); ++n) {
      const Sentence& s = sentences[n];
      if (s.ids.size() != config_.sentence_length) {
        throw ShapeError("receiver expects sentences of length " + std::to_string(config_.sentence_length) +
                         ", got " + std::to_string(s.ids.size()));
      }
      if (!s.relaxed.empty()) {
        if (s.relaxed.size() != s.ids.size() || s.relaxed[step].size() != vocab) {
          throw ShapeError("relaxed sentence vectors do not match vocabulary size");
        }
        std::copy(s.relaxed[step].begin(), s.relaxed[step].end(), t.data() + n * vocab);
      } else {
        const int id = s.ids[step];
        if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
          throw std::out_of_range("symbol id " + std::to_string(id) + " outside vocabulary");
        }
        t[n * vocab + static_cast<std::size_t>(id)] = 1.0;
      }
    }
    symbols.push_back(tape.constant(std::move(t)));
  }
  return forward(tape, symbols);
}

FusionHead::FusionHead(ParameterStore& store, std::size_t feature_channels, std::size_t receiver_channels, Rng& rng,
                       double gamma_init, double beta_init)
    : receiver_channels_(receiver_channels) {
  conv_ = Conv2d(store, "fusion.conv", feature_channels + receiver_channels, 1, 1, rng, false);
  bn_ = BatchNorm(store, "fusion.bn", 1);
  store.at("fusion.bn.gamma").value.fill(gamma_init);
  store.at("fusion.bn.beta").value.fill(beta_init);
}

Var FusionHead::forward(Tape& tape, const Var& x, const Var& x_prime, bool training) const {
  const Shape& s = x.shape();
  if (s.size() != 4 || x_prime.shape().size() != 2 || x_prime.shape()[0] != s[0] ||
      x_prime.shape()[1] != receiver_channels_) {
    throw ShapeError("fuse: x " + shape_string(s) + " with x' " + shape_string(x_prime.shape()));
  }
  Var joined = ops::concat({x, ops::broadcast_spatial(x_prime, s[2], s[3])}, 1);
  return ops::sigmoid(bn_(tape, conv_(tape, joined), training));
}

}  // namespace sunet
