// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "sunet/nn.hpp"

namespace sunet {

struct BackboneConfig {
  std::size_t in_channels = 1;
  std::size_t base_channels = 8;
  std::size_t depth = 3;
  std::size_t feature_channels = 4;  // channels of the emitted feature map x
  std::size_t height = 32;
  std::size_t width = 32;

  // Throws ConfigError on violated invariants.
  void validate() const;
};

/// Miniature UNet. Encoder blocks are (conv3x3, batch norm, ReLU) x 2 with 2x2
/// max pooling between levels; the decoder upsamples by nearest neighbour,
/// applies a 3x3 conv, concatenates the matching encoder features and runs
/// another block. A final 1x1 conv emits x with no output activation.
class Backbone {
 public:
  Backbone(ParameterStore& store, const BackboneConfig& config, Rng& rng);

  // image[N, in_channels, H, W] with H, W divisible by 2^depth.
  // Returns x[N, feature_channels, H, W].
  Var forward(Tape& tape, const Var& image, bool training) const;

  const BackboneConfig& config() const noexcept { return config_; }

 private:
  struct Block {
    Conv2d conv1, conv2;
    BatchNorm bn1, bn2;
  };
  struct UpStage {
    Conv2d up_conv;
    Block block;
  };

  Block make_block(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  Var run_block(Tape& tape, const Block& b, const Var& x, bool training) const;

  BackboneConfig config_;
  std::vector<Block> encoder_;
  Block bottleneck_;
  std::vector<UpStage> decoder_;  // ordered from coarsest to finest
  Conv2d head_;
};

}  // namespace sunet
