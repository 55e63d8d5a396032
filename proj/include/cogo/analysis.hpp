#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cogo/attack.hpp"
#include "cogo/dataset.hpp"
#include "cogo/model.hpp"

namespace cogo {

/// Percentage of predictions that differ from their labels.
double attack_success_rate(std::span<const int> predictions, std::span<const int> labels);

/// Entropy (nats) of |g| / sum|g| over all elements; 0 for an all-zero tensor.
double gradient_dispersion(const Array& grad);

struct DispersionProfile {
  std::vector<double> pre;   ///< per block, MIM-equivalent attack
  std::vector<double> post;  ///< per block, the given attack config
};

/// Mean qkv-gradient dispersion per block, averaged over every gradient
/// evaluation of a COGO run with `cfg` on each image. Gradients are observed
/// after any suppression hooks.
std::vector<double> dispersion_values(const Model& model, const Array& images, std::span<const int> labels,
                                      const AttackConfig& cfg, std::size_t threads = 0);

DispersionProfile dispersion_profile(const Model& model, const Array& images, std::span<const int> labels,
                                     const AttackConfig& cogo_cfg, std::size_t threads = 0);

/// Channel-summed |d loss / d x| for one (C,H,W) image, min-max normalized
/// to [0,1] as an (H,W) map; a constant map becomes all zeros.
Array sensitivity_map(const Model& model, const Array& image, int label);
Array normalize_map(const Array& map);

/// (image, label, stream) -> adversarial result on a fixed surrogate.
using AttackFn = std::function<AttackResult(const Array& image, int label, std::uint64_t stream)>;

/// Adversarial batch (N,C,H,W) for every image of `data`, image i on stream i.
Array generate_adversarial(const Dataset& data, const AttackFn& attack, std::size_t threads = 0);

struct NamedModel {
  std::string id;
  const Model* model = nullptr;
};

struct TransferRow {
  std::string target;
  double asr = 0.0;                ///< over all images
  double asr_clean_correct = 0.0;  ///< over images the target gets right when clean
  std::size_t n = 0;
  std::size_t n_clean_correct = 0;
};

struct TransferReport {
  std::string surrogate;
  std::vector<TransferRow> rows;
  std::uint64_t seed = 0;
  nlohmann::json config;
};

/// Evaluates every target on the same adversarial batch.
TransferReport evaluate_transfer(const std::string& surrogate, const Array& x_adv, const Dataset& clean,
                                 std::span<const NamedModel> targets, std::uint64_t seed, nlohmann::json config = {});

/// attack(surrogate, seed) builds the attack function for one surrogate and seed.
using AttackFactory = std::function<AttackFn(const Model& surrogate, std::uint64_t seed)>;

std::vector<TransferReport> transfer_matrix(std::span<const NamedModel> surrogates, std::span<const NamedModel> targets,
                                            const AttackFactory& attack, const Dataset& data,
                                            std::span<const std::uint64_t> seeds, nlohmann::json config = {},
                                            std::size_t threads = 0);

}  // namespace cogo
