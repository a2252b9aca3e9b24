// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sunet/nn.hpp"

namespace sunet {

enum class ChannelMode { Train, Infer };

std::string to_string(ChannelMode mode);

// Id of the start-of-message token. Never emitted; content symbols are
// 1..vocab_size-1.
inline constexpr int kStartToken = 0;

enum class SenderInput { Pool, Flatten };

struct ChannelConfig {
  std::size_t sentence_length = 10;  // N_w
  std::size_t vocab_size = 64;       // N_V, including the start token
  std::size_t hidden_size = 64;
  std::size_t cell_size = 64;
  std::size_t num_lstm_layers = 2;
  std::size_t embedding_dim = 32;
  std::size_t receiver_channels = 4;  // C_r, width of x'
  double temperature = 1.0;
  bool straight_through = false;
  SenderInput sender_input = SenderInput::Pool;
  // Initial affine of the fusion batch norm. The normalised logit map puts
  // background near beta, so empty images need a strongly negative start.
  double fusion_gamma_init = 4.0;
  double fusion_beta_init = -6.0;

  void validate() const;
};

/// One emitted message. `relaxed` holds the per-step simplex vectors (length
/// vocab_size) in train mode and is empty in infer mode.
struct Sentence {
  std::vector<int> ids;
  std::vector<std::vector<double>> relaxed;
};

/// softmax((log p + g) / tau) for one probability vector. p is clamped at
/// 1e-12 before the log. Throws ConfigError when tau <= 0.
std::vector<double> gumbel_softmax(std::span<const double> p, double tau, std::span<const double> gumbel);

/// Row-wise Gumbel-Softmax on the tape: p[N,K], gumbel[N,K].
Var gumbel_softmax(const Var& p, double tau, const Tensor& gumbel);

struct SenderOutput {
  std::vector<Sentence> sentences;  // one per batch item
  std::vector<Var> symbols;         // per step, [N, vocab_size]: relaxed or one-hot
  Var h_last;                       // top-layer hidden state after consuming the last symbol
};

/// Maps the feature map x to a sentence. The pooled (or flattened) features
/// pass through a linear map into the first step of a stacked LSTM with zero
/// initial state; the next step consumes the start token, and each of the
/// sentence_length steps after that emits one symbol whose embedding feeds
/// the following step.
class Sender {
 public:
  Sender() = default;
  Sender(ParameterStore& store, const ChannelConfig& config, std::size_t feature_channels, std::size_t feature_area,
         Rng& rng);

  // Train mode requires `rng`; infer mode ignores it and uses argmax.
  SenderOutput forward(Tape& tape, const Var& x, ChannelMode mode, Rng* rng, double tau) const;

 private:
  ChannelConfig config_;
  std::size_t feature_channels_ = 0;
  std::size_t feature_area_ = 0;
  Linear input_;
  Parameter* embedding_ = nullptr;  // [vocab_size, embedding_dim]
  StackedLstm lstm_;
  Linear vocab_head_;  // hidden -> vocab_size - 1 content logits
};

/// Standard single-layer LSTM over the symbol sequence; the final hidden state
/// maps linearly to x'[N, receiver_channels].
class Receiver {
 public:
  Receiver() = default;
  Receiver(ParameterStore& store, const ChannelConfig& config, Rng& rng);

  Var forward(Tape& tape, const std::vector<Var>& symbols) const;
  // Convenience overload: one-hot ids (or the relaxed vectors when present).
  Var forward(Tape& tape, std::span<const Sentence> sentences) const;

 private:
  ChannelConfig config_;
  Parameter* embedding_ = nullptr;
  StackedLstm lstm_;
  Linear output_;
};

/// Concat(x, broadcast x') -> 1x1 conv -> batch norm -> sigmoid.
class FusionHead {
 public:
  FusionHead() = default;
  FusionHead(ParameterStore& store, std::size_t feature_channels, std::size_t receiver_channels, Rng& rng,
             double gamma_init = 1.0, double beta_init = 0.0);

  // x[N,C_x,H,W], x_prime[N,C_r] -> mask probabilities [N,1,H,W].
  Var forward(Tape& tape, const Var& x, const Var& x_prime, bool training) const;

 private:
  Conv2d conv_;
  BatchNorm bn_;
  std::size_t receiver_channels_ = 0;
};

}  // namespace sunet
