#include "cogo/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "cogo/error.hpp"
#include "cogo/parallel.hpp"

namespace cogo {

double attack_success_rate(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size())
    throw ShapeError("attack_success_rate: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  if (predictions.empty()) throw ConfigError("attack_success_rate: no predictions");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) wrong += predictions[i] != labels[i];
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(labels.size());
}

double gradient_dispersion(const Array& grad) {
  double total = 0.0;
  for (float v : grad.data) total += std::abs(static_cast<double>(v));
  if (!(total > 0.0)) return 0.0;
  double h = 0.0;
  for (float v : grad.data) {
    if (v == 0.0f) continue;
    const double p = std::abs(static_cast<double>(v)) / total;
    h -= p * std::log(p);
  }
  return std::max(0.0, h);
}

std::vector<double> dispersion_values(const Model& model, const Array& images, std::span<const int> labels,
                                      const AttackConfig& cfg, std::size_t threads) {
  if (images.shape.size() != 4 || images.shape[0] != labels.size())
    throw ShapeError("dispersion_values: images " + shape_str(images.shape) + " vs " + std::to_string(labels.size()) +
                     " labels");
  if (labels.empty()) throw ConfigError("dispersion_values: no images");
  const std::size_t n = labels.size(), depth = model.spec().depth;
  const std::size_t m = numel(images.shape) / n;
  const Shape image_shape(images.shape.begin() + 1, images.shape.end());

  std::vector<std::vector<double>> per_image(n, std::vector<double>(depth, 0.0));
  parallel_for(
      n,
      [&](std::size_t i) {
        auto sums = std::make_shared<std::vector<double>>(depth, 0.0);
        auto counts = std::make_shared<std::vector<std::size_t>>(depth, 0);
        SiteHooks capture;
        for (const HookSite& site : hook_sites(model, SiteKind::qkv)) {
          const std::size_t b = site.block_index;
          capture.add(site, [sums, counts, b](const Array& g) {
            (*sums)[b] += gradient_dispersion(g);
            ++(*counts)[b];
            return g;
          });
        }
        const Array x(image_shape, std::vector<float>(images.data.begin() + i * m, images.data.begin() + (i + 1) * m));
        cogo_attack(model, x, labels[i], cfg, i, &capture);
        for (std::size_t b = 0; b < depth; ++b)
          per_image[i][b] = (*counts)[b] ? (*sums)[b] / static_cast<double>((*counts)[b]) : 0.0;
      },
      threads);

  std::vector<double> out(depth, 0.0);
  for (const auto& row : per_image)
    for (std::size_t b = 0; b < depth; ++b) out[b] += row[b];
  for (double& v : out) v /= static_cast<double>(n);
  return out;
}

DispersionProfile dispersion_profile(const Model& model, const Array& images, std::span<const int> labels,
                                     const AttackConfig& cogo_cfg, std::size_t threads) {
  DispersionProfile p;
  p.pre = dispersion_values(model, images, labels, mim_equivalent(cogo_cfg), threads);
  p.post = dispersion_values(model, images, labels, cogo_cfg, threads);
  return p;
}

Array normalize_map(const Array& map) {
  Array out = map;
  if (out.data.empty()) return out;
  const auto [lo, hi] = std::minmax_element(out.data.begin(), out.data.end());
  const float a = *lo, b = *hi;
  if (!(b > a)) {
    std::fill(out.data.begin(), out.data.end(), 0.0f);
    return out;
  }
  for (float& v : out.data) v = std::clamp((v - a) / (b - a), 0.0f, 1.0f);
  return out;
}

Array sensitivity_map(const Model& model, const Array& image, int label) {
  if (image.shape.size() != 3) throw ShapeError("sensitivity_map: expected (C,H,W), got " + shape_str(image.shape));
  const LossGrad lg = input_gradient(model, image, label);
  const std::size_t c = image.shape[0], hw = image.shape[1] * image.shape[2];
  Array map({image.shape[1], image.shape[2]});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t k = 0; k < hw; ++k) map[k] += std::abs(lg.grad[ch * hw + k]);
  return normalize_map(map);
}

Array generate_adversarial(const Dataset& data, const AttackFn& attack, std::size_t threads) {
  if (data.size() == 0) throw ConfigError("generate_adversarial: empty dataset");
  Array out(data.images.shape);
  const std::size_t m = data.image_numel();
  parallel_for(
      data.size(),
      [&](std::size_t i) {
        const AttackResult r = attack(data.image(i), data.labels[i], i);
        std::copy(r.x_adv.data.begin(), r.x_adv.data.end(), out.data.begin() + i * m);
      },
      threads);
  return out;
}

TransferReport evaluate_transfer(const std::string& surrogate, const Array& x_adv, const Dataset& clean,
                                 std::span<const NamedModel> targets, std::uint64_t seed, nlohmann::json config) {
  if (targets.empty()) throw ConfigError("evaluate_transfer: no target models");
  if (x_adv.shape != clean.images.shape)
    throw ShapeError("evaluate_transfer: adversarial batch " + shape_str(x_adv.shape) + " vs clean " +
                     shape_str(clean.images.shape));
  TransferReport report{surrogate, {}, seed, std::move(config)};
  for (const auto& t : targets) {
    const auto& s = t.model->spec();
    const Shape want{clean.size(), s.in_channels, s.image_size, s.image_size};
    if (want != x_adv.shape)
      throw ConfigError("target '" + t.id + "' expects images " + shape_str(want) + ", got " + shape_str(x_adv.shape));
    const auto adv_pred = classify(*t.model, x_adv);
    const auto clean_pred = classify(*t.model, clean.images);
    TransferRow row;
    row.target = t.id;
    row.n = clean.size();
    row.asr = attack_success_rate(adv_pred, clean.labels);
    std::size_t fooled = 0;
    for (std::size_t i = 0; i < row.n; ++i) {
      if (clean_pred[i] != clean.labels[i]) continue;
      ++row.n_clean_correct;
      fooled += adv_pred[i] != clean.labels[i];
    }
    row.asr_clean_correct =
        row.n_clean_correct ? 100.0 * static_cast<double>(fooled) / static_cast<double>(row.n_clean_correct) : 0.0;
    report.rows.push_back(row);
  }
  return report;
}

std::vector<TransferReport> transfer_matrix(std::span<const NamedModel> surrogates, std::span<const NamedModel> targets,
                                            const AttackFactory& attack, const Dataset& data,
                                            std::span<const std::uint64_t> seeds, nlohmann::json config,
                                            std::size_t threads) {
  if (surrogates.empty()) throw ConfigError("transfer_matrix: no surrogate models");
  if (seeds.empty()) throw ConfigError("transfer_matrix: no seeds");
  std::vector<TransferReport> out;
  for (const auto& s : surrogates)
    for (std::uint64_t seed : seeds) {
      const Array x_adv = generate_adversarial(data, attack(*s.model, seed), threads);
      out.push_back(evaluate_transfer(s.id, x_adv, data, targets, seed, config));
    }
  return out;
}

}  // namespace cogo
