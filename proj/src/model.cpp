// SPDX-License-Identifier: Apache-2.0
#include "sunet/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include "sunet/errors.hpp"

namespace sunet {

void ModelConfig::validate() const {
  backbone.validate();
  if (!ablate_channel) channel.validate();
}

SunetModel::SunetModel(const ModelConfig& config, std::uint64_t init_seed) : config_(config) {
  config_.validate();
  Rng rng(init_seed);
  backbone_ = std::make_unique<Backbone>(params_, config_.backbone, rng);
  const std::size_t cx = config_.backbone.feature_channels;
  if (config_.ablate_channel) {
    baseline_head_ = Conv2d(params_, "baseline.head", cx, 1, 1, rng);
  } else {
    sender_ = Sender(params_, config_.channel, cx, config_.backbone.height * config_.backbone.width, rng);
    receiver_ = Receiver(params_, config_.channel, rng);
    fusion_ = FusionHead(params_, cx, config_.channel.receiver_channels, rng, config_.channel.fusion_gamma_init,
                         config_.channel.fusion_beta_init);
  }
}

ForwardResult SunetModel::forward(Tape& tape, const Tensor& images, ChannelMode mode, Rng* rng, double tau) const {
  const bool training = mode == ChannelMode::Train;
  ForwardResult out;
  out.x = backbone_->forward(tape, tape.constant(images), training);
  if (config_.ablate_channel) {
    out.mask_prob = ops::sigmoid(baseline_head_(tape, out.x));
    return out;
  }
  out.message = sender_.forward(tape, out.x, mode, rng, tau);
  out.x_prime = receiver_.forward(tape, out.message->symbols);
  out.mask_prob = fusion_.forward(tape, out.x, out.x_prime, training);
  return out;
}

namespace {

constexpr char kMagic[] = "SUNET1";
constexpr std::size_t kMagicSize = 6;

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

void put_u64(std::string& buf, std::uint64_t v) {
  v = to_little(v);
  buf.append(reinterpret_cast<const char*>(&v), sizeof v);
}

class Reader {
 public:
  Reader(std::string data, std::string file) : data_(std::move(data)), file_(std::move(file)) {}

  std::uint64_t u64() {
    need(8, "u64");
    std::uint64_t v;
    std::memcpy(&v, data_.data() + pos_, 8);
    pos_ += 8;
    return to_little(v);
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  double f64_at(std::size_t offset) const {
    std::uint64_t bits;
    std::memcpy(&bits, data_.data() + offset, 8);
    bits = to_little(bits);
    return std::bit_cast<double>(bits);
  }
  std::size_t pos() const { return pos_; }
  std::size_t size() const { return data_.size(); }
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(file_, pos_, what); }

 private:
  void need(std::size_t n, const char* what) const {
    if (pos_ + n > data_.size()) fail(std::string("truncated checkpoint reading ") + what);
  }
  std::string data_;
  std::string file_;
  std::size_t pos_ = 0;
};

std::vector<CheckpointEntry> meta_entries(const ModelConfig& c) {
  std::vector<std::pair<std::string, double>> kv{
      {"meta.backbone.in_channels", double(c.backbone.in_channels)},
      {"meta.backbone.base_channels", double(c.backbone.base_channels)},
      {"meta.backbone.depth", double(c.backbone.depth)},
      {"meta.backbone.feature_channels", double(c.backbone.feature_channels)},
      {"meta.backbone.height", double(c.backbone.height)},
      {"meta.backbone.width", double(c.backbone.width)},
      {"meta.ablate_channel", c.ablate_channel ? 1.0 : 0.0},
  };
  if (!c.ablate_channel) {
    const ChannelConfig& ch = c.channel;
    kv.insert(kv.end(), {{"meta.channel.sentence_length", double(ch.sentence_length)},
                         {"meta.channel.vocab_size", double(ch.vocab_size)},
                         {"meta.channel.hidden_size", double(ch.hidden_size)},
                         {"meta.channel.cell_size", double(ch.cell_size)},
                         {"meta.channel.num_lstm_layers", double(ch.num_lstm_layers)},
                         {"meta.channel.embedding_dim", double(ch.embedding_dim)},
                         {"meta.channel.receiver_channels", double(ch.receiver_channels)},
                         {"meta.channel.temperature", ch.temperature},
                         {"meta.channel.straight_through", ch.straight_through ? 1.0 : 0.0},
                         {"meta.channel.fusion_gamma_init", ch.fusion_gamma_init},
                         {"meta.channel.fusion_beta_init", ch.fusion_beta_init},
                         {"meta.channel.sender_flatten", ch.sender_input == SenderInput::Flatten ? 1.0 : 0.0}});
  }
  std::vector<CheckpointEntry> out;
  for (auto& [k, v] : kv) out.push_back({k, Tensor::scalar(v)});
  return out;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries) {
  std::string buf(kMagic, kMagicSize);
  put_u64(buf, entries.size());
  std::uint64_t offset = 0;
  for (const auto& e : entries) {
    put_u64(buf, e.name.size());
    buf += e.name;
    put_u64(buf, e.value.rank());
    for (std::size_t d : e.value.shape()) put_u64(buf, d);
    put_u64(buf, offset);
    offset += 8 * e.value.size();
  }
  for (const auto& e : entries) {
    for (double v : e.value.values()) put_u64(buf, std::bit_cast<std::uint64_t>(v));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(data), path.string());
  if (r.size() < kMagicSize || r.bytes(kMagicSize, "magic") != std::string(kMagic, kMagicSize)) {
    throw ParseError(path.string(), 0, "bad magic, expected SUNET1");
  }
  const std::uint64_t count = r.u64();
  if (count > r.size()) r.fail("implausible entry count");
  struct Manifest {
    std::string name;
    Shape shape;
    std::uint64_t offset;
  };
  std::vector<Manifest> manifest;
  for (std::uint64_t i = 0; i < count; ++i) {
    Manifest m;
    const std::uint64_t len = r.u64();
    m.name = r.bytes(len, "name");
    const std::uint64_t rank = r.u64();
    if (rank > 16) r.fail("implausible rank for " + m.name);
    for (std::uint64_t d = 0; d < rank; ++d) m.shape.push_back(r.u64());
    m.offset = r.u64();
    manifest.push_back(std::move(m));
  }
  const std::size_t payload = r.pos();
  std::vector<CheckpointEntry> out;
  for (const Manifest& m : manifest) {
    const std::size_t n = shape_numel(m.shape);
    if (m.offset % 8 != 0 || payload + m.offset + 8 * n > r.size()) r.fail("payload of " + m.name + " out of range");
    Tensor t(m.shape);
    for (std::size_t i = 0; i < n; ++i) t[i] = r.f64_at(payload + m.offset + 8 * i);
    out.push_back({m.name, std::move(t)});
  }
  return out;
}

void save_model(const SunetModel& model, const std::filesystem::path& path) {
  std::vector<CheckpointEntry> entries = meta_entries(model.config());
  model.params().for_each([&](const Parameter& p) { entries.push_back({p.name, p.value}); });
  write_checkpoint(path, entries);
}

std::unique_ptr<SunetModel> load_model(const std::filesystem::path& path) {
  const auto entries = read_checkpoint(path);
  std::map<std::string, const Tensor*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e.value;
  auto meta = [&](const std::string& key) -> double {
    auto it = by_name.find("meta." + key);
    if (it == by_name.end()) throw ConfigError("checkpoint " + path.string() + " lacks meta." + key);
    return it->second->item();
  };
  auto meta_size = [&](const std::string& key) { return static_cast<std::size_t>(meta(key)); };

  ModelConfig c;
  c.backbone.in_channels = meta_size("backbone.in_channels");
  c.backbone.base_channels = meta_size("backbone.base_channels");
  c.backbone.depth = meta_size("backbone.depth");
  c.backbone.feature_channels = meta_size("backbone.feature_channels");
  c.backbone.height = meta_size("backbone.height");
  c.backbone.width = meta_size("backbone.width");
  c.ablate_channel = meta("ablate_channel") != 0.0;
  if (!c.ablate_channel) {
    c.channel.sentence_length = meta_size("channel.sentence_length");
    c.channel.vocab_size = meta_size("channel.vocab_size");
    c.channel.hidden_size = meta_size("channel.hidden_size");
    c.channel.cell_size = meta_size("channel.cell_size");
    c.channel.num_lstm_layers = meta_size("channel.num_lstm_layers");
    c.channel.embedding_dim = meta_size("channel.embedding_dim");
    c.channel.receiver_channels = meta_size("channel.receiver_channels");
    c.channel.temperature = meta("channel.temperature");
    c.channel.straight_through = meta("channel.straight_through") != 0.0;
    c.channel.fusion_gamma_init = meta("channel.fusion_gamma_init");
    c.channel.fusion_beta_init = meta("channel.fusion_beta_init");
    c.channel.sender_input = meta("channel.sender_flatten") != 0.0 ? SenderInput::Flatten : SenderInput::Pool;
  }
  auto model = std::make_unique<SunetModel>(c, 0);
  model->params().for_each([&](Parameter& p) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw ConfigError("checkpoint " + path.string() + " lacks parameter " + p.name);
    if (it->second->shape() != p.value.shape()) {
      throw ConfigError("checkpoint parameter " + p.name + " has shape " + shape_string(it->second->shape()) +
                        ", model expects " + shape_string(p.value.shape()));
    }
    p.value = *it->second;
  });
  return model;
}

}  // namespace sunet
