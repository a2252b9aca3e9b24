// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sunet/model.hpp"
#include "sunet/synthdata.hpp"

namespace sunet {

enum class OptimizerKind { Adam, Sgd };
enum class LossKind { Dice, Bce };

std::string to_string(OptimizerKind k);
std::string to_string(LossKind k);
OptimizerKind parse_optimizer(const std::string& s);
LossKind parse_loss(const std::string& s);

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::Dice;
  // tau_t = max(tau_min, tau_0 * exp(-anneal_rate * t)); anneal_rate 0 keeps tau_0.
  double tau_min = 0.5;
  double anneal_rate = 0.0;
  std::size_t checkpoint_every = 0;  // 0 disables periodic checkpoints
  double val_fraction = 0.2;         // trailing share of the dataset held out

  void validate() const;
};

struct EpochReport {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_dsc = 0.0;
  double tau = 0.0;

  friend bool operator==(const EpochReport&, const EpochReport&) = default;
};

/// 1 - (2 sum(p t) + eps) / (sum p + sum t + eps) per batch item, averaged
/// over the batch. Throws ShapeError on mismatched shapes and
/// std::invalid_argument when target is not binary.
Var dice_loss(const Var& pred, const Tensor& target, double eps = 1.0);
/// Mean binary cross-entropy, p clamped to [1e-12, 1 - 1e-12].
Var bce_loss(const Var& pred, const Tensor& target);

/// 2|A n B| / (|A| + |B|); 1 when both are empty.
double dsc(const Mask& a, const Mask& b);
Mask threshold(const Image& prob, double level = 0.5);
/// Keeps the largest 8-connected foreground component. Ties go to the
/// component whose first pixel comes first in raster order.
Mask largest_component(const Mask& mask);

Tensor stack_images(const std::vector<const Image*>& images);
Tensor stack_masks(const std::vector<const Mask*>& masks);

struct Prediction {
  Mask mask;
  std::optional<Sentence> sentence;  // absent for the ablated model
  Image prob;
};

// Deterministic inference with batch norm in eval mode and argmax symbols.
std::vector<Prediction> predict(const SunetModel& model, const std::vector<const Image*>& images,
                                std::size_t batch_size = 16);
Prediction predict(const SunetModel& model, const Image& image);

struct DatasetSplit {
  std::vector<const SegmentationSample*> train;
  std::vector<const SegmentationSample*> val;
};
// The last round(n * val_fraction) samples (at least one when n >= 2 and the
// fraction is positive) form the validation set.
DatasetSplit split_dataset(const std::vector<SegmentationSample>& samples, double val_fraction);

double mean_dsc(const SunetModel& model, const std::vector<const SegmentationSample*>& samples);

struct TrainResult {
  std::vector<EpochReport> reports;
  std::size_t best_epoch = 0;
  double best_val_dsc = 0.0;
};

using EpochCallback = std::function<void(const EpochReport&, const SunetModel&)>;

/// Co-trains every parameter of `model` end to end. Validation DSC is measured
/// after post-processing; the best-validation parameters are restored before
/// returning. With an empty validation set the training set is scored.
/// Throws NumericalError (with epoch, tau and learning rate) on NaN/Inf.
TrainResult train(SunetModel& model, const DatasetSplit& data, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

double tau_at(const TrainConfig& config, double tau0, std::size_t epoch_index);

void write_epochs_csv(const std::filesystem::path& path, const std::vector<EpochReport>& reports);

}  // namespace sunet
