// SPDX-License-Identifier: Apache-2.0
#include "sunet/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sunet/errors.hpp"

namespace sunet {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

class Section {
 public:
  Section(const json& root, const std::string& name, std::set<std::string> allowed) : name_(name) {
    if (!root.contains(name)) return;
    obj_ = &root.at(name);
    if (!obj_->is_object()) throw ConfigError("config key '" + name + "' must be an object");
    for (const auto& [key, value] : obj_->items()) {
      if (!allowed.contains(key)) throw ConfigError("unknown config key '" + name + "." + key + "'");
    }
  }

  template <typename T>
  void get(const char* key, T& out) const {
    if (!obj_ || !obj_->contains(key)) return;
    const json& v = obj_->at(key);
    try {
      if constexpr (std::is_same_v<T, std::size_t>) {
        if (!v.is_number_unsigned()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("");
      }
      out = v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError("config key '" + name_ + "." + key + "' has the wrong type");
    }
  }

  void range(const char* key, std::pair<double, double>& out) const {
    if (!obj_ || !obj_->contains(key)) return;
    const json& v = obj_->at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      throw ConfigError("config key '" + name_ + "." + key + "' must be a [lo, hi] pair");
    }
    out = {v[0].get<double>(), v[1].get<double>()};
  }

 private:
  std::string name_;
  const json* obj_ = nullptr;
};

}  // namespace

std::uint64_t RunConfig::require_seed() const {
  if (!seed) throw ConfigError("config must set 'seed' (or pass --seed)");
  return *seed;
}

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> kTop{"seed", "data", "backbone", "channel", "train", "analysis"};
  for (const auto& [key, value] : root.items()) {
    if (!kTop.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }

  RunConfig c;
  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned()) throw ConfigError("config key 'seed' must be a non-negative integer");
    c.seed = root["seed"].get<std::uint64_t>();
  }

  const Section data(root, "data",
                     {"n", "path", "p_present", "area_range", "ecc_range", "noise_sigma", "image_size", "contrast",
                      "slices_per_subject", "emit_grade"});
  data.get("n", c.n);
  std::string path;
  data.get("path", path);
  if (!path.empty()) c.data_path = path;
  data.get("p_present", c.data.p_present);
  data.range("area_range", c.data.area_range);
  data.range("ecc_range", c.data.ecc_range);
  data.get("noise_sigma", c.data.noise_sigma);
  data.get("image_size", c.data.image_size);
  data.get("contrast", c.data.contrast);
  data.get("slices_per_subject", c.data.slices_per_subject);
  data.get("emit_grade", c.data.emit_grade);

  const Section bb(root, "backbone", {"in_channels", "base_channels", "depth", "feature_channels"});
  bb.get("in_channels", c.model.backbone.in_channels);
  bb.get("base_channels", c.model.backbone.base_channels);
  bb.get("depth", c.model.backbone.depth);
  bb.get("feature_channels", c.model.backbone.feature_channels);
  c.model.backbone.height = c.model.backbone.width = c.data.image_size;

  const Section ch(root, "channel",
                   {"sentence_length", "vocab_size", "hidden_size", "cell_size", "num_lstm_layers", "embedding_dim",
                    "receiver_channels", "temperature", "straight_through", "sender_input", "fusion_gamma_init",
                    "fusion_beta_init"});
  ChannelConfig& cc = c.model.channel;
  ch.get("sentence_length", cc.sentence_length);
  ch.get("vocab_size", cc.vocab_size);
  ch.get("hidden_size", cc.hidden_size);
  ch.get("cell_size", cc.cell_size);
  ch.get("num_lstm_layers", cc.num_lstm_layers);
  ch.get("embedding_dim", cc.embedding_dim);
  ch.get("receiver_channels", cc.receiver_channels);
  ch.get("temperature", cc.temperature);
  ch.get("straight_through", cc.straight_through);
  std::string sender_input = "pool";
  ch.get("sender_input", sender_input);
  if (sender_input == "pool") cc.sender_input = SenderInput::Pool;
  else if (sender_input == "flatten") cc.sender_input = SenderInput::Flatten;
  else throw ConfigError("config key 'channel.sender_input' must be \"pool\" or \"flatten\"");
  ch.get("fusion_gamma_init", cc.fusion_gamma_init);
  ch.get("fusion_beta_init", cc.fusion_beta_init);

  const Section tr(root, "train",
                   {"epochs", "batch_size", "learning_rate", "optimizer", "beta1", "beta2", "adam_eps", "loss",
                    "tau_min", "anneal_rate", "checkpoint_every", "val_fraction", "ablate_channel"});
  TrainConfig& t = c.train;
  tr.get("epochs", t.epochs);
  tr.get("batch_size", t.batch_size);
  tr.get("learning_rate", t.learning_rate);
  std::string optimizer = to_string(t.optimizer), loss = to_string(t.loss);
  tr.get("optimizer", optimizer);
  t.optimizer = parse_optimizer(optimizer);
  tr.get("beta1", t.beta1);
  tr.get("beta2", t.beta2);
  tr.get("adam_eps", t.adam_eps);
  tr.get("loss", loss);
  t.loss = parse_loss(loss);
  tr.get("tau_min", t.tau_min);
  tr.get("anneal_rate", t.anneal_rate);
  tr.get("checkpoint_every", t.checkpoint_every);
  tr.get("val_fraction", t.val_fraction);
  tr.get("ablate_channel", c.model.ablate_channel);

  const Section an(root, "analysis", {"min_count", "l2", "max_k", "min_coverage"});
  an.get("min_count", c.analysis.min_count);
  an.get("l2", c.analysis.l2);
  an.get("max_k", c.analysis.max_k);
  an.get("min_coverage", c.analysis.min_coverage);

  c.data.validate();
  c.model.validate();
  if (c.seed) c.train.seed = *c.seed;
  c.train.validate();
  if (c.n < 1) throw ConfigError("data.n must be >= 1");
  if (c.analysis.min_count < 1) throw ConfigError("analysis.min_count must be >= 1");
  if (c.analysis.max_k < 1) throw ConfigError("analysis.max_k must be >= 1");
  if (!(c.analysis.min_coverage > 0.0 && c.analysis.min_coverage <= 1.0)) {
    throw ConfigError("analysis.min_coverage must be in (0, 1]");
  }
  if (!(c.analysis.l2 >= 0.0)) throw ConfigError("analysis.l2 must be >= 0");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string dump_run_config(const RunConfig& c) {
  ordered_json j;
  if (c.seed) j["seed"] = *c.seed;
  else j["seed"] = nullptr;
  j["data"] = {{"n", c.n},
               {"path", c.data_path ? c.data_path->string() : ""},
               {"p_present", c.data.p_present},
               {"area_range", {c.data.area_range.first, c.data.area_range.second}},
               {"ecc_range", {c.data.ecc_range.first, c.data.ecc_range.second}},
               {"noise_sigma", c.data.noise_sigma},
               {"image_size", c.data.image_size},
               {"contrast", c.data.contrast},
               {"slices_per_subject", c.data.slices_per_subject},
               {"emit_grade", c.data.emit_grade}};
  const BackboneConfig& b = c.model.backbone;
  j["backbone"] = {{"in_channels", b.in_channels},
                   {"base_channels", b.base_channels},
                   {"depth", b.depth},
                   {"feature_channels", b.feature_channels}};
  const ChannelConfig& ch = c.model.channel;
  j["channel"] = {{"sentence_length", ch.sentence_length},
                  {"vocab_size", ch.vocab_size},
                  {"hidden_size", ch.hidden_size},
                  {"cell_size", ch.cell_size},
                  {"num_lstm_layers", ch.num_lstm_layers},
                  {"embedding_dim", ch.embedding_dim},
                  {"receiver_channels", ch.receiver_channels},
                  {"temperature", ch.temperature},
                  {"straight_through", ch.straight_through},
                  {"sender_input", ch.sender_input == SenderInput::Pool ? "pool" : "flatten"},
                  {"fusion_gamma_init", ch.fusion_gamma_init},
                  {"fusion_beta_init", ch.fusion_beta_init}};
  const TrainConfig& t = c.train;
  j["train"] = {{"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"learning_rate", t.learning_rate},
                {"optimizer", to_string(t.optimizer)},
                {"beta1", t.beta1},
                {"beta2", t.beta2},
                {"adam_eps", t.adam_eps},
                {"loss", to_string(t.loss)},
                {"tau_min", t.tau_min},
                {"anneal_rate", t.anneal_rate},
                {"checkpoint_every", t.checkpoint_every},
                {"val_fraction", t.val_fraction},
                {"ablate_channel", c.model.ablate_channel}};
  j["analysis"] = {{"min_count", c.analysis.min_count},
                   {"l2", c.analysis.l2},
                   {"max_k", c.analysis.max_k},
                   {"min_coverage", c.analysis.min_coverage}};
  return j.dump(2) + "\n";
}

}  // namespace sunet
