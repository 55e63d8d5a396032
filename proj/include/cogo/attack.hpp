#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cogo/frequency.hpp"
#include "cogo/model.hpp"
#include "cogo/suppression.hpp"

namespace cogo {

struct AttackConfig {
  float epsilon = 8.0f / 255.0f;
  std::size_t iterations = 10;
  float lambda_step = 1.5f;
  float momentum_mu = 1.0f;
  std::size_t spectral_samples = 5;
  CeConfig ce;
  std::optional<SuppressionConfig> is = SuppressionConfig{};
  std::vector<SiteKind> is_sites = {SiteKind::qkv};
  std::uint64_t seed = 0;

  float step_size() const { return lambda_step * epsilon / static_cast<float>(iterations); }
  void validate() const;
};

/// Configuration whose COGO loop coincides with the MIM baseline: no
/// suppression, identity enhancement, one sample per iteration.
AttackConfig mim_equivalent(AttackConfig cfg);

struct PerturbationState {
  Array delta;
  Array momentum;
};

struct AttackResult {
  Array x_adv;                ///< (C,H,W)
  std::vector<double> losses;  ///< surrogate loss per iteration, averaged over samples
  int pred_before = -1;
  int pred_after = -1;
  std::size_t iterations = 0;
};

struct LossGrad {
  double loss = 0.0;
  Array grad;  ///< d loss / d image, (C,H,W)
};

/// Cross-entropy of one (C,H,W) image in eval mode and its input gradient.
LossGrad input_gradient(const Model& model, const Array& image, int label, const SiteHooks* hooks = nullptr);

/// delta' = clamp(delta, -eps, eps), then clamp(x + delta', 0, 1) - x,
/// repeated until a fixed point so that the result is idempotent.
Array project(const Array& delta, float epsilon, const Array& x_clean);

/// Untargeted COGO attack on one (C,H,W) image. Random draws come from
/// Rng(cfg.seed, stream). `extra_hooks` run after the suppression hooks at
/// their sites, e.g. to observe suppressed gradients.
AttackResult cogo_attack(const Model& model, const Array& x_clean, int label, const AttackConfig& cfg,
                         std::uint64_t stream = 0, const SiteHooks* extra_hooks = nullptr);

/// Momentum iterative FGSM on the raw input; ignores cfg.ce, cfg.is and
/// cfg.spectral_samples.
AttackResult mim_attack(const Model& model, const Array& x_clean, int label, const AttackConfig& cfg,
                        const SiteHooks* extra_hooks = nullptr);

/// Suppression hooks for every block at the configured sites.
SiteHooks make_is_hooks(const Model& model, const SuppressionConfig& is, const std::vector<SiteKind>& sites, Rng rng);

}  // namespace cogo
