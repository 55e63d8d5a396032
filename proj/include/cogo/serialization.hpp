#pragma once

#include <json.hpp>

#include "cogo/attack.hpp"
#include "cogo/error.hpp"
#include "cogo/frequency.hpp"
#include "cogo/model.hpp"
#include "cogo/suppression.hpp"

namespace cogo {

inline void to_json(nlohmann::json& j, const ModelSpec& s) {
  j = {{"variant", to_string(s.variant)},   {"image_size", s.image_size}, {"patch_size", s.patch_size},
       {"in_channels", s.in_channels},      {"embed_dim", s.embed_dim},   {"heads", s.heads},
       {"depth", s.depth},                  {"mlp_hidden", s.mlp_hidden}, {"num_classes", s.num_classes},
       {"dropout_p", s.dropout_p}};
}

inline void from_json(const nlohmann::json& j, ModelSpec& s) {
  s.variant = parse_variant(j.at("variant").get<std::string>());
  j.at("image_size").get_to(s.image_size);
  j.at("patch_size").get_to(s.patch_size);
  j.at("in_channels").get_to(s.in_channels);
  j.at("embed_dim").get_to(s.embed_dim);
  j.at("heads").get_to(s.heads);
  j.at("depth").get_to(s.depth);
  j.at("mlp_hidden").get_to(s.mlp_hidden);
  j.at("num_classes").get_to(s.num_classes);
  j.at("dropout_p").get_to(s.dropout_p);
  s.validate();
}

inline void to_json(nlohmann::json& j, const TrainingMeta& m) {
  j = {{"seed", m.seed},
       {"epochs", m.epochs},
       {"lr", m.lr},
       {"beta1", m.beta1},
       {"beta2", m.beta2},
       {"weight_decay", m.weight_decay},
       {"batch_size", m.batch_size},
       {"warmup_epochs", m.warmup_epochs},
       {"final_accuracy", m.final_accuracy},
       {"epoch_losses", m.epoch_losses}};
}

inline void from_json(const nlohmann::json& j, TrainingMeta& m) {
  j.at("seed").get_to(m.seed);
  j.at("epochs").get_to(m.epochs);
  j.at("lr").get_to(m.lr);
  j.at("beta1").get_to(m.beta1);
  j.at("beta2").get_to(m.beta2);
  j.at("weight_decay").get_to(m.weight_decay);
  j.at("batch_size").get_to(m.batch_size);
  j.at("warmup_epochs").get_to(m.warmup_epochs);
  j.at("final_accuracy").get_to(m.final_accuracy);
  j.at("epoch_losses").get_to(m.epoch_losses);
}

inline void to_json(nlohmann::json& j, const CeConfig& c) {
  j = {{"gamma", c.gamma}, {"noise_std", c.noise_std}, {"rho", c.rho}};
}

inline void from_json(const nlohmann::json& j, CeConfig& c) {
  c.gamma = j.value("gamma", c.gamma);
  c.noise_std = j.value("noise_std", c.noise_std);
  c.rho = j.value("rho", c.rho);
  c.validate();
}

inline std::string to_string(ThresholdMode m) { return m == ThresholdMode::adaptive ? "adaptive" : "fixed"; }
inline std::string to_string(TokenScaleMode m) { return m == TokenScaleMode::adaptive_sigmoid ? "adaptive" : "fixed"; }

inline ThresholdMode parse_threshold_mode(const std::string& s) {
  if (s == "adaptive") return ThresholdMode::adaptive;
  if (s == "fixed") return ThresholdMode::fixed;
  throw ConfigError("unknown threshold mode '" + s + "' (valid: adaptive, fixed)");
}

inline TokenScaleMode parse_token_scale_mode(const std::string& s) {
  if (s == "adaptive") return TokenScaleMode::adaptive_sigmoid;
  if (s == "fixed") return TokenScaleMode::fixed;
  throw ConfigError("unknown token scale mode '" + s + "' (valid: adaptive, fixed)");
}

inline void to_json(nlohmann::json& j, const SuppressionConfig& c) {
  j = {{"alpha", c.alpha},
       {"beta_mi", c.beta_mi},
       {"beta_corr", c.beta_corr},
       {"n_pairs", c.n_pairs},
       {"weight_floor", c.weight_floor},
       {"mi_bins", c.mi_bins},
       {"threshold_mode", to_string(c.threshold_mode)},
       {"tau_mi", c.tau_mi},
       {"tau_corr", c.tau_corr},
       {"token_scale_mode", to_string(c.token_scale_mode)},
       {"token_scale", c.token_scale}};
}

inline void from_json(const nlohmann::json& j, SuppressionConfig& c) {
  c.alpha = j.value("alpha", c.alpha);
  c.beta_mi = j.value("beta_mi", c.beta_mi);
  c.beta_corr = j.value("beta_corr", c.beta_corr);
  c.n_pairs = j.value("n_pairs", c.n_pairs);
  c.weight_floor = j.value("weight_floor", c.weight_floor);
  c.mi_bins = j.value("mi_bins", c.mi_bins);
  if (j.contains("threshold_mode")) c.threshold_mode = parse_threshold_mode(j.at("threshold_mode").get<std::string>());
  c.tau_mi = j.value("tau_mi", c.tau_mi);
  c.tau_corr = j.value("tau_corr", c.tau_corr);
  if (j.contains("token_scale_mode"))
    c.token_scale_mode = parse_token_scale_mode(j.at("token_scale_mode").get<std::string>());
  c.token_scale = j.value("token_scale", c.token_scale);
  c.validate();
}

inline void to_json(nlohmann::json& j, const AttackConfig& c) {
  std::vector<std::string> sites;
  for (SiteKind k : c.is_sites) sites.push_back(to_string(k));
  j = {{"epsilon", c.epsilon},
       {"iterations", c.iterations},
       {"lambda", c.lambda_step},
       {"mu", c.momentum_mu},
       {"spectral_samples", c.spectral_samples},
       {"ce", c.ce},
       {"is", c.is ? nlohmann::json(*c.is) : nlohmann::json(nullptr)},
       {"is_sites", sites},
       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, AttackConfig& c) {
  c.epsilon = j.value("epsilon", c.epsilon);
  c.iterations = j.value("iterations", c.iterations);
  c.lambda_step = j.value("lambda", c.lambda_step);
  c.momentum_mu = j.value("mu", c.momentum_mu);
  c.spectral_samples = j.value("spectral_samples", c.spectral_samples);
  if (j.contains("ce")) c.ce = j.at("ce").get<CeConfig>();
  if (j.contains("is")) {
    if (j.at("is").is_null())
      c.is.reset();
    else
      c.is = j.at("is").get<SuppressionConfig>();
  }
  if (j.contains("is_sites")) {
    c.is_sites.clear();
    for (const auto& s : j.at("is_sites")) c.is_sites.push_back(parse_site_kind(s.get<std::string>()));
  }
  c.seed = j.value("seed", c.seed);
  c.validate();
}

}  // namespace cogo
