// SPDX-License-Identifier: Apache-2.0
#include "sunet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "sunet/errors.hpp"
#include "sunet/ops.hpp"

namespace sunet {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }
std::string to_string(LossKind k) { return k == LossKind::Dice ? "dice" : "bce"; }

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "sgd") return OptimizerKind::Sgd;
  throw ConfigError("unknown optimizer '" + s + "' (expected adam or sgd)");
}

LossKind parse_loss(const std::string& s) {
  if (s == "dice") return LossKind::Dice;
  if (s == "bce") return LossKind::Bce;
  throw ConfigError("unknown loss '" + s + "' (expected dice or bce)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  if (!(tau_min > 0.0)) throw ConfigError("tau_min must be > 0");
  if (!(anneal_rate >= 0.0)) throw ConfigError("anneal_rate must be >= 0");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in [0, 1)");
}

namespace {

void check_binary_target(const Var& pred, const Tensor& target, const char* who) {
  if (pred.shape() != target.shape() || pred.shape().empty()) {
    throw ShapeError(std::string(who) + ": prediction " + shape_string(pred.shape()) + " vs target " +
                     shape_string(target.shape()));
  }
  for (double t : target.values()) {
    if (t != 0.0 && t != 1.0) throw std::invalid_argument(std::string(who) + ": target must be binary");
  }
}

}  // namespace

Var dice_loss(const Var& pred, const Tensor& target, double eps) {
  check_binary_target(pred, target, "dice_loss");
  const std::size_t batch = pred.shape()[0];
  const std::size_t per = target.size() / batch;
  const Tensor& p = pred.value();
  std::vector<double> num(batch), den(batch);
  double loss = 0.0;
  for (std::size_t n = 0; n < batch; ++n) {
    double pt = 0, sp = 0, st = 0;
    for (std::size_t i = n * per; i < (n + 1) * per; ++i) {
      pt += p[i] * target[i];
      sp += p[i];
      st += target[i];
    }
    num[n] = 2.0 * pt + eps;
    den[n] = sp + st + eps;
    loss += 1.0 - num[n] / den[n];
  }
  Tape& tape = pred.tape();
  return tape.record(Tensor::scalar(loss / double(batch)), {pred},
                     [pred, target, num, den, per, batch](Tape& t, const Tensor& g) {
                       Tensor& gp = t.grad_buffer(pred);
                       const double scale = g[0] / double(batch);
                       for (std::size_t n = 0; n < batch; ++n) {
                         const double d2 = den[n] * den[n];
                         for (std::size_t i = n * per; i < (n + 1) * per; ++i) {
                           gp[i] -= scale * (2.0 * target[i] * den[n] - num[n]) / d2;
                         }
                       }
                     });
}

Var bce_loss(const Var& pred, const Tensor& target) {
  check_binary_target(pred, target, "bce_loss");
  constexpr double lo = 1e-12, hi = 1.0 - 1e-12;
  const Tensor& p = pred.value();
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], lo, hi);
    loss -= target[i] ? std::log(q) : std::log(1.0 - q);
  }
  const double count = double(p.size());
  return pred.tape().record(Tensor::scalar(loss / count), {pred}, [pred, target, count](Tape& t, const Tensor& g) {
    const Tensor& pv = t.value(pred.id());
    Tensor& gp = t.grad_buffer(pred);
    for (std::size_t i = 0; i < pv.size(); ++i) {
      if (pv[i] < lo || pv[i] > hi) continue;
      gp[i] += g[0] / count * (target[i] ? -1.0 / pv[i] : 1.0 / (1.0 - pv[i]));
    }
  });
}

double dsc(const Mask& a, const Mask& b) {
  if (!a.same_extent(b)) throw ShapeError("dsc: masks differ in extent");
  std::size_t sa = 0, sb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a.data[i] != 0;
    sb += b.data[i] != 0;
    both += a.data[i] && b.data[i];
  }
  if (sa + sb == 0) return 1.0;
  return 2.0 * double(both) / double(sa + sb);
}

Mask threshold(const Image& prob, double level) {
  Mask m(prob.height, prob.width);
  for (std::size_t i = 0; i < prob.size(); ++i) m.data[i] = prob.data[i] >= level ? 1 : 0;
  return m;
}

Mask largest_component(const Mask& mask) {
  const std::size_t h = mask.height, w = mask.width;
  std::vector<int> label(mask.size(), -1);
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask.data[start] || label[start] >= 0) continue;
    const int id = static_cast<int>(sizes.size());
    std::size_t count = 0;
    stack.assign(1, start);
    label[start] = id;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++count;
      const std::size_t r = p / w, c = p % w;
      for (std::size_t rr = r ? r - 1 : 0; rr <= std::min(r + 1, h - 1); ++rr) {
        for (std::size_t cc = c ? c - 1 : 0; cc <= std::min(c + 1, w - 1); ++cc) {
          const std::size_t q = rr * w + cc;
          if (mask.data[q] && label[q] < 0) {
            label[q] = id;
            stack.push_back(q);
          }
        }
      }
    }
    sizes.push_back(count);
  }
  Mask out(h, w);
  if (sizes.empty()) return out;
  const int keep = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = label[i] == keep ? 1 : 0;
  return out;
}

Tensor stack_images(const std::vector<const Image*>& images) {
  if (images.empty()) throw ShapeError("stack_images: empty batch");
  const std::size_t h = images[0]->height, w = images[0]->width;
  Tensor t(Shape{images.size(), 1, h, w});
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (!images[n]->same_extent(*images[0])) throw ShapeError("stack_images: images differ in extent");
    std::copy(images[n]->data.begin(), images[n]->data.end(), t.data() + n * h * w);
  }
  return t;
}

Tensor stack_masks(const std::vector<const Mask*>& masks) {
  if (masks.empty()) throw ShapeError("stack_masks: empty batch");
  const std::size_t h = masks[0]->height, w = masks[0]->width;
  Tensor t(Shape{masks.size(), 1, h, w});
  for (std::size_t n = 0; n < masks.size(); ++n) {
    if (!masks[n]->same_extent(*masks[0])) throw ShapeError("stack_masks: masks differ in extent");
    for (std::size_t i = 0; i < h * w; ++i) t[n * h * w + i] = masks[n]->data[i] ? 1.0 : 0.0;
  }
  return t;
}

std::vector<Prediction> predict(const SunetModel& model, const std::vector<const Image*>& images,
                                std::size_t batch_size) {
  std::vector<Prediction> out;
  out.reserve(images.size());
  batch_size = std::max<std::size_t>(batch_size, 1);
  for (std::size_t begin = 0; begin < images.size(); begin += batch_size) {
    const std::size_t end = std::min(images.size(), begin + batch_size);
    const std::vector<const Image*> chunk(images.begin() + long(begin), images.begin() + long(end));
    Tape tape;
    const ForwardResult r = model.forward(tape, stack_images(chunk), ChannelMode::Infer, nullptr, 1.0);
    const Tensor& prob = r.mask_prob.value();
    const std::size_t h = chunk[0]->height, w = chunk[0]->width;
    for (std::size_t n = 0; n < chunk.size(); ++n) {
      Prediction p;
      p.prob = Image(h, w);
      std::copy_n(prob.data() + n * h * w, h * w, p.prob.data.begin());
      p.mask = largest_component(threshold(p.prob));
      if (r.message) p.sentence = r.message->sentences[n];
      out.push_back(std::move(p));
    }
  }
  return out;
}

Prediction predict(const SunetModel& model, const Image& image) { return predict(model, {&image}).front(); }

DatasetSplit split_dataset(const std::vector<SegmentationSample>& samples, double val_fraction) {
  const std::size_t n = samples.size();
  std::size_t n_val = static_cast<std::size_t>(std::llround(double(n) * val_fraction));
  if (val_fraction > 0.0 && n >= 2) n_val = std::max<std::size_t>(n_val, 1);
  n_val = std::min(n_val, n > 0 ? n - 1 : 0);
  DatasetSplit split;
  for (std::size_t i = 0; i < n; ++i) (i < n - n_val ? split.train : split.val).push_back(&samples[i]);
  return split;
}

double mean_dsc(const SunetModel& model, const std::vector<const SegmentationSample*>& samples) {
  if (samples.empty()) return 0.0;
  std::vector<const Image*> images;
  for (const auto* s : samples) images.push_back(&s->image);
  const auto preds = predict(model, images);
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) total += dsc(preds[i].mask, samples[i]->mask);
  return total / double(samples.size());
}

double tau_at(const TrainConfig& config, double tau0, std::size_t epoch_index) {
  if (config.anneal_rate == 0.0) return tau0;
  return std::max(config.tau_min, tau0 * std::exp(-config.anneal_rate * double(epoch_index)));
}

namespace {

class Optimizer {
 public:
  Optimizer(ParameterStore& store, const TrainConfig& cfg) : store_(store), cfg_(cfg) {
    store_.for_each([&](Parameter& p) {
      m_.emplace_back(p.value.shape(), 0.0);
      v_.emplace_back(p.value.shape(), 0.0);
    });
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    std::size_t k = 0;
    store_.for_each([&](Parameter& p) {
      Tensor& m = m_[k];
      Tensor& v = v_[k];
      ++k;
      if (!p.trainable) return;
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.grad[i];
        if (cfg_.optimizer == OptimizerKind::Sgd) {
          p.value[i] -= cfg_.learning_rate * g;
          continue;
        }
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        p.value[i] -= cfg_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.adam_eps);
      }
    });
  }

 private:
  ParameterStore& store_;
  const TrainConfig& cfg_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
};

std::vector<Tensor> snapshot(const ParameterStore& store) {
  std::vector<Tensor> out;
  store.for_each([&](const Parameter& p) { out.push_back(p.value); });
  return out;
}

void restore(ParameterStore& store, const std::vector<Tensor>& values) {
  std::size_t k = 0;
  store.for_each([&](Parameter& p) { p.value = values[k++]; });
}

// Fisher-Yates over our own draws; std::shuffle's algorithm is unspecified.
void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.next() % i]);
}

}  // namespace

TrainResult train(SunetModel& model, const DatasetSplit& data, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (data.train.empty()) throw ConfigError("training set is empty");
  const auto& scored = data.val.empty() ? data.train : data.val;
  ParameterStore& params = model.params();
  Optimizer optimizer(params, config);
  Rng order_rng(derive_seed(config.seed, 0));
  Rng gumbel_rng(derive_seed(config.seed, 1));
  const double tau0 = model.config().channel.temperature;

  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  std::vector<Tensor> best;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    const double tau = tau_at(config, tau0, e);
    shuffle(order, order_rng);
    double total = 0.0;
    try {
      for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
        const std::size_t end = std::min(order.size(), begin + config.batch_size);
        std::vector<const Image*> images;
        std::vector<const Mask*> masks;
        for (std::size_t i = begin; i < end; ++i) {
          images.push_back(&data.train[order[i]]->image);
          masks.push_back(&data.train[order[i]]->mask);
        }
        Tape tape;
        const ForwardResult r = model.forward(tape, stack_images(images), ChannelMode::Train, &gumbel_rng, tau);
        const Tensor target = stack_masks(masks);
        const Var loss = config.loss == LossKind::Dice ? dice_loss(r.mask_prob, target) : bce_loss(r.mask_prob, target);
        params.zero_grad();
        tape.backward(loss);
        params.for_each([](const Parameter& p) {
          if (p.trainable && !p.grad.all_finite()) throw NumericalError("non-finite gradient in " + p.name);
        });
        optimizer.step();
        total += loss.value().item() * double(end - begin);
      }
    } catch (const NumericalError& err) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "training aborted at epoch %zu (tau=%.6g, lr=%.6g): ", e + 1, tau,
                    config.learning_rate);
      throw NumericalError(buf + std::string(err.what()));
    }

    EpochReport rep{e + 1, total / double(order.size()), mean_dsc(model, scored), tau};
    result.reports.push_back(rep);
    if (best.empty() || rep.val_dsc > result.best_val_dsc) {
      result.best_val_dsc = rep.val_dsc;
      result.best_epoch = rep.epoch;
      best = snapshot(params);
    }
    if (on_epoch) on_epoch(rep, model);
  }
  restore(params, best);
  return result;
}

void write_epochs_csv(const std::filesystem::path& path, const std::vector<EpochReport>& reports) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "epoch,train_loss,val_dsc,tau\n";
  char buf[128];
  for (const EpochReport& r : reports) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss, r.val_dsc, r.tau);
    out << buf;
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace sunet
