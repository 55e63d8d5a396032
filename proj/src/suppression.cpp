#include "cogo/suppression.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>

#include "cogo/error.hpp"
#include "cogo/log.hpp"

namespace cogo {

namespace {

void check_pair(std::span<const float> a, std::span<const float> b, const char* op) {
  if (a.size() != b.size())
    throw ShapeError(std::string(op) + ": vector lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()) + " differ");
  if (a.size() < 2) throw ShapeError(std::string(op) + ": vectors need at least 2 elements");
}

std::pair<float, float> min_max(std::span<const float> a) {
  auto [lo, hi] = std::minmax_element(a.begin(), a.end());
  return {*lo, *hi};
}

// Entropy of a histogram given in a fixed cell order; zero cells are skipped.
double entropy_of_counts(const std::vector<std::size_t>& counts, std::size_t n) {
  const double total = static_cast<double>(n);
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

void SuppressionConfig::validate() const {
  if (!(alpha > 0.0f)) throw ConfigError("suppression: alpha must be positive");
  if (n_pairs < 1) throw ConfigError("suppression: n_pairs must be at least 1");
  if (!(weight_floor > 0.0f && weight_floor <= 1.0f)) throw ConfigError("suppression: weight_floor must lie in (0, 1]");
  if (mi_bins < 2) throw ConfigError("suppression: mi_bins must be at least 2");
  if (!(beta_mi >= 0.0f) || !(beta_corr >= 0.0f)) throw ConfigError("suppression: beta values must be >= 0");
  if (token_scale_mode == TokenScaleMode::fixed && !(token_scale >= 0.0f && token_scale <= 1.0f))
    throw ConfigError("suppression: fixed token scale must lie in [0, 1]");
}

float pearson(std::span<const float> a, std::span<const float> b) {
  check_pair(a, b, "pearson");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ma += a[k];
    mb += b[k];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double da = a[k] - ma, db = b[k] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (!(va > 0.0) || !(vb > 0.0)) return 0.0f;
  return static_cast<float>(std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0));
}

std::size_t histogram_bin(float x, float lo, float hi, std::size_t bins) {
  if (!(hi > lo)) return 0;
  const double t = (static_cast<double>(x) - lo) / (static_cast<double>(hi) - lo);
  const auto idx = static_cast<std::size_t>(std::max(0.0, t * static_cast<double>(bins)));
  return std::min(idx, bins - 1);
}

double histogram_entropy(std::span<const float> a, std::size_t bins) {
  if (a.empty() || bins < 1) throw ConfigError("histogram_entropy: empty input or no bins");
  const auto [lo, hi] = min_max(a);
  std::vector<std::size_t> counts(bins, 0);
  for (float x : a) ++counts[histogram_bin(x, lo, hi, bins)];
  return entropy_of_counts(counts, a.size());
}

float mutual_info(std::span<const float> a, std::span<const float> b, std::size_t bins) {
  check_pair(a, b, "mutual_info");
  if (bins < 2) throw ConfigError("mutual_info: bins must be at least 2");
  const auto [alo, ahi] = min_max(a);
  const auto [blo, bhi] = min_max(b);
  if (!(ahi > alo) || !(bhi > blo)) return 0.0f;
  std::vector<std::size_t> ca(bins, 0), cb(bins, 0), cab(bins * bins, 0);
  for (std::size_t k = 0; k < a.size(); ++k) {
    const std::size_t ia = histogram_bin(a[k], alo, ahi, bins);
    const std::size_t ib = histogram_bin(b[k], blo, bhi, bins);
    ++ca[ia];
    ++cb[ib];
    ++cab[ia * bins + ib];
  }
  // I = H(A) + H(B) - H(A,B). For b == a the joint's nonzero cells are the
  // diagonal in marginal order, so the identity I(A;A) = H(A) holds exactly.
  const double ha = entropy_of_counts(ca, a.size());
  const double hb = entropy_of_counts(cb, a.size());
  const double hab = entropy_of_counts(cab, a.size());
  return static_cast<float>(std::max(0.0, (ha + hb) - hab));
}

Thresholds adaptive_thresholds(std::span<const PairIndicator> indicators, float beta_mi, float beta_corr) {
  if (indicators.empty()) throw ConfigError("adaptive_thresholds: no channel pairs");
  double smi = 0.0, scorr = 0.0;
  for (const auto& p : indicators) {
    smi += p.mi;
    scorr += std::abs(p.corr);
  }
  const double n = static_cast<double>(indicators.size());
  return Thresholds{static_cast<float>(beta_mi * (smi / n)), static_cast<float>(beta_corr * (scorr / n))};
}

std::vector<ChannelPair> sample_channel_pairs(std::size_t channels, std::size_t n_pairs, Rng& rng) {
  if (channels < 2) throw ShapeError("sample_channel_pairs: need at least 2 channels, got " + std::to_string(channels));
  const std::size_t total = channels * (channels - 1) / 2;
  std::vector<ChannelPair> out;
  if (n_pairs >= total) {
    for (std::size_t i = 0; i < channels; ++i)
      for (std::size_t j = i + 1; j < channels; ++j) out.push_back({i, j});
    return out;
  }
  std::set<std::pair<std::size_t, std::size_t>> seen;
  while (out.size() < n_pairs) {
    const std::size_t i = rng.below(channels);
    std::size_t j = rng.below(channels - 1);
    if (j >= i) ++j;
    const ChannelPair p{std::min(i, j), std::max(i, j)};
    if (seen.insert({p.i, p.j}).second) out.push_back(p);
  }
  return out;
}

std::vector<float> channel_vector(const Array& grad, std::size_t c) {
  if (grad.shape.empty()) throw ShapeError("channel_vector: scalar gradient has no channel axis");
  const std::size_t channels = grad.shape.back();
  if (c >= channels) throw ShapeError("channel_vector: channel " + std::to_string(c) + " out of range");
  const std::size_t rows = grad.size() / channels;
  std::vector<float> v(rows);
  for (std::size_t r = 0; r < rows; ++r) v[r] = grad[r * channels + c];
  return v;
}

RedundancyAnalysis analyze_redundancy(const Array& grad, const SuppressionConfig& cfg, Rng& rng) {
  cfg.validate();
  if (grad.shape.empty() || grad.shape.back() < 2)
    throw ShapeError("suppression_weights: need at least 2 channels, got shape " + shape_str(grad.shape));
  const std::size_t channels = grad.shape.back();

  RedundancyAnalysis out;
  for (const auto& p : sample_channel_pairs(channels, cfg.n_pairs, rng)) {
    const auto gi = channel_vector(grad, p.i);
    const auto gj = channel_vector(grad, p.j);
    PairIndicator ind;
    ind.i = p.i;
    ind.j = p.j;
    ind.mi = mutual_info(gi, gj, cfg.mi_bins);
    ind.corr = pearson(gi, gj);
    out.indicators.push_back(ind);
  }
  out.thresholds = cfg.threshold_mode == ThresholdMode::adaptive
                       ? adaptive_thresholds(out.indicators, cfg.beta_mi, cfg.beta_corr)
                       : Thresholds{cfg.tau_mi, cfg.tau_corr};

  std::vector<unsigned> flags(channels, 0);
  for (auto& ind : out.indicators) {
    ind.t_mi = ind.mi > out.thresholds.mi;
    ind.t_corr = std::abs(ind.corr) > out.thresholds.corr;
    const unsigned f = static_cast<unsigned>(ind.t_mi) + static_cast<unsigned>(ind.t_corr);
    flags[ind.i] += f;
    flags[ind.j] += f;
  }
  out.weights.weights.resize(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    const float s = cfg.alpha * static_cast<float>(flags[c]);
    out.weights.weights[c] = std::max(cfg.weight_floor, 1.0f - s);
  }
  return out;
}

ChannelWeights suppression_weights(const Array& grad, const SuppressionConfig& cfg, Rng& rng) {
  return analyze_redundancy(grad, cfg, rng).weights;
}

float additional_token_scale(std::span<const float> g_additional, std::span<const float> g_primary,
                             const SuppressionConfig& cfg) {
  if (cfg.token_scale_mode == TokenScaleMode::fixed) return cfg.token_scale;
  double na = 0.0, np = 0.0;
  for (float v : g_additional) na += static_cast<double>(v) * v;
  for (float v : g_primary) np += static_cast<double>(v) * v;
  if (!(np > 0.0)) {
    log_warn("additional-token scale: primary gradient norm is zero; using c = 0.5");
    return 0.5f;
  }
  const double ratio = std::sqrt(na) / std::sqrt(np);
  return static_cast<float>(1.0 / (1.0 + std::exp(-ratio)));
}

Array apply_suppression(const Array& grad, const SuppressionConfig& cfg, const TokenLayout& layout, Rng& rng) {
  const ChannelWeights w = suppression_weights(grad, cfg, rng);
  Array out = grad;
  const std::size_t channels = grad.shape.back();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= w.weights[k % channels];

  if (!layout.additional_token_index || grad.shape.size() != 3) return out;
  const std::size_t batch = grad.shape[0], tokens = grad.shape[1];
  const std::size_t extra = *layout.additional_token_index;
  if (extra >= tokens || layout.num_tokens() != tokens)
    throw ShapeError("suppression hook: additional token index " + std::to_string(extra) +
                     " out of range for gradient shape " + shape_str(grad.shape));
  std::vector<float> g_add, g_primary;
  g_add.reserve(batch * channels);
  g_primary.reserve(batch * (tokens - 1) * channels);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < tokens; ++t) {
      const float* row = out.data.data() + (b * tokens + t) * channels;
      auto& dst = t == extra ? g_add : g_primary;
      dst.insert(dst.end(), row, row + channels);
    }
  const float c = additional_token_scale(g_add, g_primary, cfg);
  for (std::size_t b = 0; b < batch; ++b) {
    float* row = out.data.data() + (b * tokens + extra) * channels;
    for (std::size_t k = 0; k < channels; ++k) row[k] *= c;
  }
  return out;
}

GradHook make_is_hook(const SuppressionConfig& cfg, const TokenLayout& layout, Rng rng) {
  cfg.validate();
  if (layout.additional_token_index && *layout.additional_token_index >= layout.num_tokens())
    throw ConfigError("make_is_hook: additional token index out of range");
  auto state = std::make_shared<Rng>(rng);
  return [cfg, layout, state](const Array& g) { return apply_suppression(g, cfg, layout, *state); };
}

}  // namespace cogo
