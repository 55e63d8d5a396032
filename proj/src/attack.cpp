#include "cogo/attack.hpp"

#include <algorithm>
#include <cmath>

#include "cogo/error.hpp"

namespace cogo {

namespace {

void check_image(const Model& model, const Array& x, int label) {
  const auto& s = model.spec();
  const Shape want{s.in_channels, s.image_size, s.image_size};
  if (x.shape != want) throw ShapeError("attack: expected image " + shape_str(want) + ", got " + shape_str(x.shape));
  if (label < 0 || static_cast<std::size_t>(label) >= s.num_classes)
    throw ConfigError("attack: label " + std::to_string(label) + " out of range");
  for (float v : x.data)
    if (!(v >= 0.0f && v <= 1.0f)) throw ConfigError("attack: clean image must lie in [0, 1]");
}

Array plus(const Array& a, const Array& b) {
  Array out = a;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += b[k];
  return out;
}

void check_finite(const Array& g, std::size_t iteration) {
  if (!g.all_finite()) throw NumericError("attack: non-finite gradient at iteration " + std::to_string(iteration));
}

// m <- mu*m + g/|g|_1, then delta <- project(delta + step*sign(m)).
void update(PerturbationState& st, const Array& g, const AttackConfig& cfg, const Array& x_clean) {
  double l1 = 0.0;
  for (float v : g.data) l1 += std::abs(static_cast<double>(v));
  const float inv = l1 > 0.0 ? static_cast<float>(l1) : 1.0f;
  for (std::size_t k = 0; k < g.size(); ++k) st.momentum[k] = cfg.momentum_mu * st.momentum[k] + g[k] / inv;
  const float step = cfg.step_size();
  for (std::size_t k = 0; k < g.size(); ++k) {
    const float m = st.momentum[k];
    st.delta[k] += step * static_cast<float>((m > 0.0f) - (m < 0.0f));
  }
  st.delta = project(st.delta, cfg.epsilon, x_clean);
}

int predict_one(const Model& model, const Array& x) {
  Shape s{1};
  s.insert(s.end(), x.shape.begin(), x.shape.end());
  return classify(model, Array(s, x.data))[0];
}

AttackResult finish(const Model& model, const Array& x_clean, const PerturbationState& st, AttackResult r) {
  r.x_adv = x_clean;
  for (std::size_t k = 0; k < r.x_adv.size(); ++k) r.x_adv[k] = std::clamp(x_clean[k] + st.delta[k], 0.0f, 1.0f);
  r.pred_before = predict_one(model, x_clean);
  r.pred_after = predict_one(model, r.x_adv);
  return r;
}

}  // namespace

LossGrad input_gradient(const Model& model, const Array& image, int label, const SiteHooks* hooks) {
  Tape tape;
  Shape batch_shape{1};
  batch_shape.insert(batch_shape.end(), image.shape.begin(), image.shape.end());
  ForwardOptions opt;
  opt.hooks = hooks && !hooks->empty() ? hooks : nullptr;
  opt.input_grad = true;
  ForwardPass pass = forward(model, tape, Array(batch_shape, image.data), opt);
  const int labels[1] = {label};
  Tensor loss = cross_entropy(pass.logits, labels);
  tape.backward(loss);
  return LossGrad{loss.value()[0], Array(image.shape, pass.input.grad()->data)};
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0f) || !std::isfinite(epsilon)) throw ConfigError("attack: epsilon must be finite and >= 0");
  if (iterations < 1) throw ConfigError("attack: iterations must be at least 1");
  if (spectral_samples < 1) throw ConfigError("attack: spectral_samples must be at least 1");
  if (!(lambda_step >= 0.0f)) throw ConfigError("attack: lambda must be >= 0");
  if (!(momentum_mu >= 0.0f)) throw ConfigError("attack: momentum must be >= 0");
  ce.validate();
  if (is) is->validate();
}

AttackConfig mim_equivalent(AttackConfig cfg) {
  cfg.is.reset();
  cfg.ce = CeConfig{0.0f, 0.0f, 0.0f};
  cfg.spectral_samples = 1;
  return cfg;
}

Array project(const Array& delta, float epsilon, const Array& x_clean) {
  if (delta.shape != x_clean.shape)
    throw ShapeError("project: delta " + shape_str(delta.shape) + " vs image " + shape_str(x_clean.shape));
  Array d = delta;
  for (int pass = 0; pass < 8; ++pass) {
    Array next = d;
    for (std::size_t k = 0; k < d.size(); ++k) {
      const float clipped = std::clamp(d[k], -epsilon, epsilon);
      next[k] = std::clamp(x_clean[k] + clipped, 0.0f, 1.0f) - x_clean[k];
    }
    if (next.data == d.data) break;
    d = std::move(next);
  }
  return d;
}

SiteHooks make_is_hooks(const Model& model, const SuppressionConfig& is, const std::vector<SiteKind>& sites, Rng rng) {
  SiteHooks hooks;
  const TokenLayout layout = model.layout();
  for (SiteKind kind : sites)
    for (const HookSite& site : hook_sites(model, kind))
      hooks.add(site, make_is_hook(is, layout, rng.substream(site.block_index * 8 + static_cast<std::uint64_t>(kind))));
  return hooks;
}

AttackResult cogo_attack(const Model& model, const Array& x_clean, int label, const AttackConfig& cfg,
                         std::uint64_t stream, const SiteHooks* extra_hooks) {
  cfg.validate();
  check_image(model, x_clean, label);
  const Rng base(cfg.seed, stream);
  Rng ce_rng = base.substream(1);
  SiteHooks hooks;
  if (cfg.is) hooks = make_is_hooks(model, *cfg.is, cfg.is_sites, base.substream(2));
  if (extra_hooks) hooks.append(*extra_hooks);
  const bool identity = cfg.ce.is_identity();

  PerturbationState st{Array(x_clean.shape), Array(x_clean.shape)};
  AttackResult result;
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    Array g;
    double loss = 0.0;
    for (std::size_t s = 0; s < cfg.spectral_samples; ++s) {
      LossGrad lg;
      if (identity) {
        lg = input_gradient(model, plus(x_clean, st.delta), label, &hooks);
      } else {
        CeSample sample = ce_sample(x_clean, st.delta, cfg.ce, ce_rng);
        lg = input_gradient(model, sample.image, label, &hooks);
        lg.grad = ce_backward(lg.grad, sample.gain);
      }
      loss += lg.loss;
      if (s == 0)
        g = std::move(lg.grad);
      else
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += lg.grad[k];
    }
    if (cfg.spectral_samples > 1) {
      const float n = static_cast<float>(cfg.spectral_samples);
      for (float& v : g.data) v /= n;
    }
    check_finite(g, t);
    update(st, g, cfg, x_clean);
    result.losses.push_back(loss / static_cast<double>(cfg.spectral_samples));
  }
  result.iterations = cfg.iterations;
  return finish(model, x_clean, st, std::move(result));
}

AttackResult mim_attack(const Model& model, const Array& x_clean, int label, const AttackConfig& cfg,
                        const SiteHooks* extra_hooks) {
  cfg.validate();
  check_image(model, x_clean, label);
  PerturbationState st{Array(x_clean.shape), Array(x_clean.shape)};
  AttackResult result;
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    LossGrad lg = input_gradient(model, plus(x_clean, st.delta), label, extra_hooks);
    check_finite(lg.grad, t);
    update(st, lg.grad, cfg, x_clean);
    result.losses.push_back(lg.loss);
  }
  result.iterations = cfg.iterations;
  return finish(model, x_clean, st, std::move(result));
}

}  // namespace cogo
