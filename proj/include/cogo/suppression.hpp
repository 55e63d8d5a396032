#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cogo/model.hpp"
#include "cogo/rng.hpp"
#include "cogo/tensor.hpp"

namespace cogo {

enum class ThresholdMode { adaptive, fixed };
enum class TokenScaleMode { adaptive_sigmoid, fixed };

/// Individuality-suppression parameters.
///
/// In adaptive threshold mode tau_mi = beta_mi * mean(MI) and
/// tau_corr = beta_corr * mean(|r|) over the sampled pairs; in fixed mode the
/// configured tau values are used directly. The additional-token factor is
/// sigmoid(|g_add| / |g_primary|) in adaptive mode, `token_scale` otherwise.
struct SuppressionConfig {
  float alpha = 0.3f;
  float beta_mi = 1.0f;
  float beta_corr = 1.0f;
  std::size_t n_pairs = 5;
  float weight_floor = 0.1f;
  std::size_t mi_bins = 16;
  ThresholdMode threshold_mode = ThresholdMode::adaptive;
  float tau_mi = 0.5f;
  float tau_corr = 0.7f;
  TokenScaleMode token_scale_mode = TokenScaleMode::adaptive_sigmoid;
  float token_scale = 0.1f;

  void validate() const;
};

struct ChannelPair {
  std::size_t i = 0;
  std::size_t j = 0;
  friend bool operator==(const ChannelPair&, const ChannelPair&) = default;
};

struct PairIndicator {
  std::size_t i = 0;
  std::size_t j = 0;
  float mi = 0.0f;    ///< nats
  float corr = 0.0f;  ///< Pearson r
  bool t_mi = false;
  bool t_corr = false;
};

struct Thresholds {
  float mi = 0.0f;
  float corr = 0.0f;
};

struct ChannelWeights {
  std::vector<float> weights;
};

/// Sample Pearson correlation; 0 when either vector has zero variance.
float pearson(std::span<const float> a, std::span<const float> b);

/// Equal-width bin of `x` within [lo, hi]; the top edge falls in the last bin.
std::size_t histogram_bin(float x, float lo, float hi, std::size_t bins);

/// Plug-in entropy (nats) of the equal-width marginal histogram of `a`.
double histogram_entropy(std::span<const float> a, std::size_t bins);

/// Plug-in mutual information (nats) from a bins x bins equal-width joint
/// histogram, each axis spanning its own vector's [min, max]. 0 when either
/// vector is constant.
float mutual_info(std::span<const float> a, std::span<const float> b, std::size_t bins);

/// Thresholds from (mi, corr) values of the sampled pairs.
Thresholds adaptive_thresholds(std::span<const PairIndicator> indicators, float beta_mi, float beta_corr);

/// Draws min(n_pairs, C(C-1)/2) distinct unordered channel pairs. When every
/// pair is requested they are returned in lexicographic order; otherwise
/// each draw takes i = below(C), j = below(C-1) (shifted past i), orders the
/// pair and rejects repeats.
std::vector<ChannelPair> sample_channel_pairs(std::size_t channels, std::size_t n_pairs, Rng& rng);

/// Values of channel `c` (last axis) across all other axes.
std::vector<float> channel_vector(const Array& grad, std::size_t c);

struct RedundancyAnalysis {
  std::vector<PairIndicator> indicators;
  Thresholds thresholds;
  ChannelWeights weights;
};

RedundancyAnalysis analyze_redundancy(const Array& grad, const SuppressionConfig& cfg, Rng& rng);
ChannelWeights suppression_weights(const Array& grad, const SuppressionConfig& cfg, Rng& rng);

/// Scaling factor for the additional token's gradient. In adaptive mode a
/// zero primary norm yields 0.5 and a warning.
float additional_token_scale(std::span<const float> g_additional, std::span<const float> g_primary,
                             const SuppressionConfig& cfg);

/// Applies channel weights to the last axis and, for rank-3 (B,N,C)
/// gradients with an additional token, scales that token's rows.
Array apply_suppression(const Array& grad, const SuppressionConfig& cfg, const TokenLayout& layout, Rng& rng);

/// Hook wrapper around apply_suppression owning its own rng stream; copies
/// of the returned hook share that stream.
GradHook make_is_hook(const SuppressionConfig& cfg, const TokenLayout& layout, Rng rng);

}  // namespace cogo
