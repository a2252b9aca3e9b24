// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gradcheck.hpp"
#include "sunet/errors.hpp"
#include "sunet/model.hpp"
#include "sunet/ops.hpp"

using namespace sunet;
using sunet::testing::random_tensor;

namespace {

BackboneConfig tiny_backbone() {
  BackboneConfig b;
  b.base_channels = 4;
  b.depth = 2;
  b.feature_channels = 3;
  b.height = 8;
  b.width = 8;
  return b;
}

ModelConfig tiny_model(bool ablate = false) {
  ModelConfig m;
  m.backbone = tiny_backbone();
  m.channel.sentence_length = 3;
  m.channel.vocab_size = 6;
  m.channel.hidden_size = 5;
  m.channel.cell_size = 5;
  m.channel.embedding_dim = 4;
  m.channel.receiver_channels = 2;
  m.ablate_channel = ablate;
  return m;
}

double norm(const Tensor& t) {
  double s = 0;
  for (double v : t.values()) s += v * v;
  return std::sqrt(s);
}

std::filesystem::path temp_path(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "sunet_test_model";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("backbone output keeps the input resolution") {
  ParameterStore store;
  Rng rng(0);
  BackboneConfig cfg;
  Backbone net(store, cfg, rng);
  Tape tape;
  const Var x = net.forward(tape, tape.constant(random_tensor({1, 1, 32, 32}, rng, 0.0, 1.0)), false);
  CHECK(x.shape() == Shape{1, cfg.feature_channels, 32, 32});
}

TEST_CASE("backbone with all-zero parameters outputs zeros") {
  ParameterStore store;
  Rng rng(1);
  Backbone net(store, tiny_backbone(), rng);
  store.for_each([](Parameter& p) {
    if (p.trainable) p.value.fill(0.0);
  });
  for (bool training : {false, true}) {
    Tape tape;
    const Var x = net.forward(tape, tape.constant(random_tensor({2, 1, 8, 8}, rng)), training);
    for (double v : x.value().values()) CHECK(v == 0.0);
  }
}

TEST_CASE("backbone is batch-equivariant in eval mode") {
  ParameterStore store;
  Rng rng(2);
  const BackboneConfig cfg = tiny_backbone();
  Backbone net(store, cfg, rng);
  const Tensor images = random_tensor({3, 1, 8, 8}, rng);
  const std::size_t per = images.size() / 3;
  const std::array<std::size_t, 3> perm{2, 0, 1};
  Tensor permuted(images.shape());
  for (std::size_t n = 0; n < 3; ++n) {
    std::copy_n(images.data() + perm[n] * per, per, permuted.data() + n * per);
  }
  Tape tape;
  const Tensor a = net.forward(tape, tape.constant(images), false).value();
  const Tensor b = net.forward(tape, tape.constant(permuted), false).value();
  const std::size_t out_per = a.size() / 3;
  for (std::size_t n = 0; n < 3; ++n) {
    for (std::size_t i = 0; i < out_per; ++i) CHECK(b[n * out_per + i] == a[perm[n] * out_per + i]);
  }
}

TEST_CASE("backbone gradient reaches every parameter") {
  ParameterStore store;
  Rng rng(3);
  Backbone net(store, tiny_backbone(), rng);
  for (bool training : {true, false}) {
    Tape tape;
    const Var x = net.forward(tape, tape.constant(random_tensor({2, 1, 8, 8}, rng)), training);
    const Var loss = ops::sum(ops::mul(x, tape.constant(random_tensor(x.shape(), rng))));
    store.zero_grad();
    tape.backward(loss);
    store.for_each([](const Parameter& p) {
      if (p.trainable) CHECK_MESSAGE(norm(p.grad) > 0.0, p.name);
    });
  }
}

TEST_CASE("backbone rejects bad extents and channels") {
  ParameterStore store;
  Rng rng(4);
  Backbone net(store, tiny_backbone(), rng);
  Tape tape;
  CHECK_THROWS_AS(net.forward(tape, tape.constant(Tensor(Shape{1, 1, 6, 8})), false), ShapeError);
  CHECK_THROWS_AS(net.forward(tape, tape.constant(Tensor(Shape{1, 2, 8, 8})), false), ShapeError);
  BackboneConfig bad = tiny_backbone();
  bad.height = 10;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = tiny_backbone();
  bad.base_channels = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("full model forward: shapes, range and inference determinism") {
  SunetModel model(tiny_model(), 5);
  Rng rng(6);
  const Tensor images = random_tensor({2, 1, 8, 8}, rng, 0.0, 1.0);
  Tape t1, t2;
  const auto a = model.forward(t1, images, ChannelMode::Infer, nullptr, 1.0);
  const auto b = model.forward(t2, images, ChannelMode::Infer, nullptr, 1.0);
  CHECK(a.mask_prob.shape() == Shape{2, 1, 8, 8});
  CHECK(a.x_prime.shape() == Shape{2, 2});
  REQUIRE(a.message.has_value());
  for (std::size_t i = 0; i < a.mask_prob.value().size(); ++i) {
    CHECK(a.mask_prob.value()[i] == b.mask_prob.value()[i]);
    CHECK(a.mask_prob.value()[i] > 0.0);
    CHECK(a.mask_prob.value()[i] < 1.0);
  }
  for (std::size_t n = 0; n < 2; ++n) CHECK(a.message->sentences[n].ids == b.message->sentences[n].ids);
}

TEST_CASE("segmentation loss reaches every sender parameter through the relaxation") {
  SunetModel model(tiny_model(), 7);
  bool all_reached = false;
  for (std::uint64_t seed = 0; seed < 5 && !all_reached; ++seed) {
    Rng rng(seed);
    const Tensor images = random_tensor({4, 1, 8, 8}, rng, 0.0, 1.0);
    Tape tape;
    const auto out = model.forward(tape, images, ChannelMode::Train, &rng, 1.0);
    model.params().zero_grad();
    tape.backward(ops::mean(ops::mul(out.mask_prob, tape.constant(random_tensor(out.mask_prob.shape(), rng)))));
    all_reached = true;
    model.params().for_each([&](const Parameter& p) {
      if (p.trainable && p.name.starts_with("sender.") && norm(p.grad) == 0.0) all_reached = false;
    });
  }
  CHECK(all_reached);
}

TEST_CASE("ablated model has no channel parameters") {
  SunetModel model(tiny_model(true), 8);
  model.params().for_each([](const Parameter& p) {
    CHECK_FALSE(p.name.starts_with("sender."));
    CHECK_FALSE(p.name.starts_with("receiver."));
    CHECK_FALSE(p.name.starts_with("fusion."));
  });
  CHECK(model.params().find("baseline.head.weight") != nullptr);
  Tape tape;
  Rng rng(1);
  const auto out = model.forward(tape, random_tensor({1, 1, 8, 8}, rng), ChannelMode::Infer, nullptr, 1.0);
  CHECK_FALSE(out.message.has_value());
  CHECK_FALSE(out.x_prime.valid());
}

TEST_CASE("checkpoint round trip restores configuration and parameters") {
  for (bool ablate : {false, true}) {
    ModelConfig cfg = tiny_model(ablate);
    cfg.channel.cell_size = 7;
    SunetModel model(cfg, 9);
    const auto path = temp_path(ablate ? "ablated.bin" : "full.bin");
    save_model(model, path);
    auto loaded = load_model(path);
    CHECK(loaded->config().ablate_channel == ablate);
    CHECK(loaded->config().backbone.depth == cfg.backbone.depth);
    if (!ablate) CHECK(loaded->config().channel.cell_size == 7);
    model.params().for_each([&](const Parameter& p) {
      const Parameter* q = loaded->params().find(p.name);
      REQUIRE(q != nullptr);
      CHECK(q->value.shape() == p.value.shape());
      for (std::size_t i = 0; i < p.value.size(); ++i) CHECK(q->value[i] == p.value[i]);
    });
    const auto entries = read_checkpoint(path);
    bool has_channel = false;
    for (const auto& e : entries) has_channel |= e.name.starts_with("sender.") || e.name.starts_with("receiver.");
    CHECK(has_channel == !ablate);
  }
}

TEST_CASE("checkpoint parse errors carry the byte offset") {
  const auto path = temp_path("bad.bin");
  {
    std::ofstream out(path, std::ios::binary);
    out << "SUNET0";
  }
  try {
    read_checkpoint(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 0);
  }
  write_checkpoint(path, {{"w", Tensor::from({1.0, 2.0})}});
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  CHECK_THROWS_AS(read_checkpoint(path), ParseError);
}
