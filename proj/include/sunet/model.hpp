// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "sunet/backbone.hpp"
#include "sunet/channel.hpp"

namespace sunet {

struct ModelConfig {
  BackboneConfig backbone;
  ChannelConfig channel;
  // Backbone-only baseline: sigmoid(1x1 conv(x)), no sender/receiver/fusion.
  bool ablate_channel = false;

  void validate() const;
};

struct ForwardResult {
  Var x;          // backbone features
  Var mask_prob;  // [N,1,H,W] in (0,1)
  std::optional<SenderOutput> message;
  Var x_prime;    // receiver output, invalid when ablated
};

/// Backbone + emergent-language channel + fusion head, or the ablated
/// baseline. Owns all parameters.
class SunetModel {
 public:
  SunetModel(const ModelConfig& config, std::uint64_t init_seed);
  SunetModel(const SunetModel&) = delete;
  SunetModel& operator=(const SunetModel&) = delete;

  // images[N, in_channels, H, W]. Train mode uses batch-norm batch statistics
  // and Gumbel-Softmax sampling from `rng`; infer mode is deterministic.
  ForwardResult forward(Tape& tape, const Tensor& images, ChannelMode mode, Rng* rng, double tau) const;

  ParameterStore& params() noexcept { return params_; }
  const ParameterStore& params() const noexcept { return params_; }
  const ModelConfig& config() const noexcept { return config_; }

  const Backbone& backbone() const { return *backbone_; }
  const Sender& sender() const { return sender_; }
  const Receiver& receiver() const { return receiver_; }
  const FusionHead& fusion() const { return fusion_; }

 private:
  ModelConfig config_;
  ParameterStore params_;
  std::unique_ptr<Backbone> backbone_;
  Sender sender_;
  Receiver receiver_;
  FusionHead fusion_;
  Conv2d baseline_head_;
};

/// Binary checkpoint: "SUNET1", u64 entry count, then per entry a
/// length-prefixed UTF-8 name, u64 rank, u64 extents and u64 payload offset,
/// followed by the raw f64 payloads. All integers and floats little-endian.
/// Architecture hyperparameters travel as one-element "meta.*" entries.
struct CheckpointEntry {
  std::string name;
  Tensor value;
};

void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path);

void save_model(const SunetModel& model, const std::filesystem::path& path);
std::unique_ptr<SunetModel> load_model(const std::filesystem::path& path);

}  // namespace sunet
