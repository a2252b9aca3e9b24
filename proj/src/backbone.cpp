// SPDX-License-Identifier: Apache-2.0
#include "sunet/backbone.hpp"

#include <string>

#include "sunet/errors.hpp"

namespace sunet {

void BackboneConfig::validate() const {
  if (in_channels < 1 || base_channels < 1 || feature_channels < 1) {
    throw ConfigError("backbone channel counts must be >= 1");
  }
  if (depth < 1) throw ConfigError("backbone depth must be >= 1");
  const std::size_t factor = std::size_t{1} << depth;
  if (height == 0 || width == 0 || height % factor != 0 || width % factor != 0) {
    throw ConfigError("input " + std::to_string(height) + "x" + std::to_string(width) + " not divisible by 2^" +
                      std::to_string(depth));
  }
}

Backbone::Block Backbone::make_block(ParameterStore& store, const std::string& name, std::size_t in,
                                     std::size_t out, Rng& rng) {
  Block b;
  b.conv1 = Conv2d(store, name + ".conv1", in, out, 3, rng, false);
  b.bn1 = BatchNorm(store, name + ".bn1", out);
  b.conv2 = Conv2d(store, name + ".conv2", out, out, 3, rng, false);
  b.bn2 = BatchNorm(store, name + ".bn2", out);
  return b;
}

Backbone::Backbone(ParameterStore& store, const BackboneConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  std::vector<std::size_t> widths;
  for (std::size_t l = 0; l <= config_.depth; ++l) widths.push_back(config_.base_channels << l);

  std::size_t in = config_.in_channels;
  for (std::size_t l = 0; l < config_.depth; ++l) {
    encoder_.push_back(make_block(store, "backbone.enc" + std::to_string(l), in, widths[l], rng));
    in = widths[l];
  }
  bottleneck_ = make_block(store, "backbone.bottleneck", in, widths[config_.depth], rng);
  for (std::size_t l = config_.depth; l-- > 0;) {
    UpStage up;
    up.up_conv = Conv2d(store, "backbone.dec" + std::to_string(l) + ".up", widths[l + 1], widths[l], 3, rng);
    up.block = make_block(store, "backbone.dec" + std::to_string(l), 2 * widths[l], widths[l], rng);
    decoder_.push_back(std::move(up));
  }
  head_ = Conv2d(store, "backbone.head", widths[0], config_.feature_channels, 1, rng);
}

Var Backbone::run_block(Tape& tape, const Block& b, const Var& x, bool training) const {
  Var y = ops::relu(b.bn1(tape, b.conv1(tape, x), training));
  return ops::relu(b.bn2(tape, b.conv2(tape, y), training));
}

Var Backbone::forward(Tape& tape, const Var& image, bool training) const {
  const Shape& s = image.shape();
  const std::size_t factor = std::size_t{1} << config_.depth;
  if (s.size() != 4 || s[1] != config_.in_channels) {
    throw ShapeError("backbone expects [N," + std::to_string(config_.in_channels) + ",H,W], got " + shape_string(s));
  }
  if (s[2] % factor != 0 || s[3] % factor != 0) {
    throw ShapeError("backbone input " + shape_string(s) + " spatial extents not divisible by " +
                     std::to_string(factor));
  }
  std::vector<Var> skips;
  Var h = image;
  for (const Block& b : encoder_) {
    h = run_block(tape, b, h, training);
    skips.push_back(h);
    h = ops::max_pool2d(h, 2);
  }
  h = run_block(tape, bottleneck_, h, training);
  for (std::size_t k = 0; k < decoder_.size(); ++k) {
    const UpStage& up = decoder_[k];
    h = up.up_conv(tape, ops::upsample2d(h, 2));
    h = ops::concat({skips[skips.size() - 1 - k], h}, 1);
    h = run_block(tape, up.block, h, training);
  }
  return head_(tape, h);
}

}  // namespace sunet
