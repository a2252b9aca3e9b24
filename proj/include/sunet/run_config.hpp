// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "sunet/analysis.hpp"
#include "sunet/model.hpp"
#include "sunet/synthdata.hpp"
#include "sunet/trainer.hpp"

namespace sunet {

/// One JSON document driving every command:
///
///   {"seed": 0,
///    "data":     {"n", "path", "p_present", "area_range", "ecc_range", "noise_sigma",
///                 "image_size", "contrast", "slices_per_subject", "emit_grade"},
///    "backbone": {"in_channels", "base_channels", "depth", "feature_channels"},
///    "channel":  {"sentence_length", "vocab_size", "hidden_size", "cell_size",
///                 "num_lstm_layers", "embedding_dim", "receiver_channels", "temperature",
///                 "straight_through", "sender_input", "fusion_gamma_init", "fusion_beta_init"},
///    "train":    {"epochs", "batch_size", "learning_rate", "optimizer", "beta1", "beta2",
///                 "adam_eps", "loss", "tau_min", "anneal_rate", "checkpoint_every",
///                 "val_fraction", "ablate_channel"},
///    "analysis": {"min_count", "l2", "max_k", "min_coverage"}}
///
/// Every section and key is optional except "seed"; omitted keys keep the
/// struct defaults. Unknown keys are a ConfigError naming the key. The
/// backbone height/width follow the dataset's image size.
struct RunConfig {
  std::optional<std::uint64_t> seed;
  std::size_t n = 250;
  std::optional<std::filesystem::path> data_path;
  GeneratorSpec data;
  ModelConfig model;
  TrainConfig train;
  AnalysisOptions analysis;

  // ConfigError unless a seed is set.
  std::uint64_t require_seed() const;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
// The effective configuration as JSON with every key spelled out.
std::string dump_run_config(const RunConfig& config);

}  // namespace sunet
