#include <cmath>
#include <numbers>
#include <numeric>

#include "cogo/error.hpp"
#include "cogo/model.hpp"

namespace cogo {

namespace {

bool decays(const Parameter& p) {
  const auto& n = p.name;
  return p.value.shape.size() == 2 && n.size() > 7 && n.compare(n.size() - 7, 7, ".weight") == 0;
}

float schedule(float base, std::size_t step, std::size_t warmup, std::size_t total) {
  if (step < warmup) return base * static_cast<float>(step + 1) / static_cast<float>(warmup);
  const double span = static_cast<double>(std::max<std::size_t>(total - warmup, 1));
  const double t = static_cast<double>(step - warmup) / span;
  return static_cast<float>(base * 0.5 * (1.0 + std::cos(std::numbers::pi * t)));
}

// Applies one of the 8 symmetries of the square to every (C,S,S) image in
// place. Every procedural class is closed under these.
void dihedral_augment(Array& batch, Rng& rng) {
  const std::size_t B = batch.shape[0], C = batch.shape[1], S = batch.shape[2];
  if (batch.shape[3] != S) return;
  std::vector<float> tmp(S * S);
  for (std::size_t b = 0; b < B; ++b) {
    const std::uint64_t g = rng.below(8);
    if (g == 0) continue;
    for (std::size_t c = 0; c < C; ++c) {
      float* img = batch.data.data() + (b * C + c) * S * S;
      std::copy(img, img + S * S, tmp.begin());
      for (std::size_t y = 0; y < S; ++y)
        for (std::size_t x = 0; x < S; ++x) {
          std::size_t sy = (g & 4) ? x : y, sx = (g & 4) ? y : x;
          if (g & 1) sx = S - 1 - sx;
          if (g & 2) sy = S - 1 - sy;
          img[y * S + x] = tmp[sy * S + sx];
        }
    }
  }
}

// Multiplies every image by its own gain drawn log-uniformly from [1/max, max].
void gain_augment(Array& batch, float max_gain, Rng& rng) {
  const std::size_t B = batch.shape[0], per = batch.size() / B;
  const float span = std::log(max_gain);
  for (std::size_t b = 0; b < B; ++b) {
    const float g = std::exp(rng.uniform(-span, span));
    for (std::size_t k = 0; k < per; ++k) batch.data[b * per + k] *= g;
  }
}

}  // namespace

Checkpoint make_checkpoint(const Model& model, TrainingMeta meta) {
  return Checkpoint{model.spec(), model.params(), std::move(meta)};
}

Model model_from_checkpoint(const Checkpoint& ckpt) { return Model(ckpt.spec, ckpt.tensors); }

Checkpoint train(Model& model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                 const EpochCallback& on_epoch) {
  if (cfg.batch_size == 0) throw ConfigError("train: batch_size must be positive");
  if (!(cfg.lr > 0.0f)) throw ConfigError("train: lr must be positive");
  if (cfg.epochs > 0 && train_set.size() == 0) throw ConfigError("train: empty training set");

  TrainingMeta meta;
  meta.seed = cfg.seed;
  meta.epochs = cfg.epochs;
  meta.lr = cfg.lr;
  meta.beta1 = cfg.beta1;
  meta.beta2 = cfg.beta2;
  meta.weight_decay = cfg.weight_decay;
  meta.batch_size = cfg.batch_size;
  meta.warmup_epochs = cfg.warmup_epochs;

  auto& params = model.mutable_params();
  std::vector<std::vector<float>> m1, m2;
  for (const auto& p : params) {
    m1.emplace_back(p.value.size(), 0.0f);
    m2.emplace_back(p.value.size(), 0.0f);
  }

  Rng shuffle_rng = Rng(cfg.seed).substream(1);
  Rng dropout_rng = Rng(cfg.seed).substream(2);
  Rng augment_rng = Rng(cfg.seed).substream(3);
  const std::size_t n = train_set.size();
  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total = cfg.epochs * steps_per_epoch;
  const std::size_t warmup = std::min(cfg.warmup_epochs * steps_per_epoch, total);
  std::vector<std::size_t> order(n);
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++step) {
      const std::size_t k = std::min(cfg.batch_size, n - start);
      const std::span<const std::size_t> idx(order.data() + start, k);
      Array batch = train_set.gather(idx);
      if (cfg.augment) dihedral_augment(batch, augment_rng);
      if (cfg.max_gain > 1.0f) gain_augment(batch, cfg.max_gain, augment_rng);
      const std::vector<int> labels = train_set.gather_labels(idx);

      Tape tape;
      ForwardOptions opts;
      opts.train = true;
      opts.dropout_rng = &dropout_rng;
      opts.param_grads = true;
      ForwardPass fp = forward(model, tape, batch, opts);
      Tensor loss = cross_entropy(fp.logits, labels);
      const float lv = loss.value()[0];
      if (!std::isfinite(lv)) throw NumericError("training diverged at epoch " + std::to_string(epoch));
      loss_sum += static_cast<double>(lv) * static_cast<double>(k);
      tape.backward(loss);

      // AdamW with decoupled weight decay.
      const float lr = schedule(cfg.lr, step, warmup, total);
      const double t = static_cast<double>(step + 1);
      const float c1 = static_cast<float>(1.0 / (1.0 - std::pow(static_cast<double>(cfg.beta1), t)));
      const float c2 = static_cast<float>(1.0 / (1.0 - std::pow(static_cast<double>(cfg.beta2), t)));
      for (std::size_t p = 0; p < params.size(); ++p) {
        const Array* g = fp.params[p].grad();
        auto& w = params[p].value.data;
        auto& a = m1[p];
        auto& b = m2[p];
        const float decay = decays(params[p]) ? lr * cfg.weight_decay : 0.0f;
        for (std::size_t j = 0; j < w.size(); ++j) {
          const float gj = g->data[j];
          a[j] = cfg.beta1 * a[j] + (1.0f - cfg.beta1) * gj;
          b[j] = cfg.beta2 * b[j] + (1.0f - cfg.beta2) * gj * gj;
          w[j] -= lr * (a[j] * c1) / (std::sqrt(b[j] * c2) + cfg.adam_eps) + decay * w[j];
        }
      }
    }
    const double epoch_loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) throw NumericError("training diverged at epoch " + std::to_string(epoch));
    meta.epoch_losses.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss, val_set.size() ? accuracy(model, val_set) : 0.0);
  }
  meta.final_accuracy = val_set.size() ? accuracy(model, val_set) : 0.0;
  return make_checkpoint(model, std::move(meta));
}

}  // namespace cogo
