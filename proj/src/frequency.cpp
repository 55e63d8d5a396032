#include "cogo/frequency.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cogo/error.hpp"

namespace cogo {

namespace {

// Row k holds the k-th orthonormal DCT-II basis vector of length n.
std::vector<double> dct_basis(std::size_t n) {
  std::vector<double> b(n * n);
  const double a0 = std::sqrt(1.0 / static_cast<double>(n));
  const double ak = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      b[k * n + i] = (k == 0 ? a0 : ak) *
                     std::cos(std::numbers::pi * (2.0 * static_cast<double>(i) + 1.0) *
                              static_cast<double>(k) / (2.0 * static_cast<double>(n)));
  return b;
}

void check_image(const Array& a, const char* op) {
  if (a.shape.size() != 3 || a.shape[1] == 0 || a.shape[2] == 0)
    throw ShapeError(std::string(op) + ": expected (C,H,W), got " + shape_str(a.shape));
  if (!a.all_finite()) throw NumericError(std::string(op) + ": non-finite input");
}

// Separable transform per channel: forward computes B_h X B_w^T, inverse
// computes B_h^T Y B_w.
Array separable(const Array& in, bool inverse) {
  const std::size_t c = in.shape[0], h = in.shape[1], w = in.shape[2];
  const auto bh = dct_basis(h);
  const auto bw = dct_basis(w);
  Array out(in.shape);
  std::vector<double> tmp(h * w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float* x = in.data.data() + ch * h * w;
    std::fill(tmp.begin(), tmp.end(), 0.0);
    // Along H.
    for (std::size_t k = 0; k < h; ++k)
      for (std::size_t i = 0; i < h; ++i) {
        const double coef = inverse ? bh[i * h + k] : bh[k * h + i];
        for (std::size_t j = 0; j < w; ++j) tmp[k * w + j] += coef * x[i * w + j];
      }
    // Along W.
    float* y = out.data.data() + ch * h * w;
    for (std::size_t k = 0; k < h; ++k)
      for (std::size_t l = 0; l < w; ++l) {
        double acc = 0.0;
        for (std::size_t j = 0; j < w; ++j)
          acc += tmp[k * w + j] * (inverse ? bw[j * w + l] : bw[l * w + j]);
        y[k * w + l] = static_cast<float>(acc);
      }
  }
  return out;
}

}  // namespace

void CeConfig::validate() const {
  if (!(gamma >= -1.0f) || !std::isfinite(gamma))
    throw ConfigError("ce: gamma must be finite and >= -1");
  if (!(noise_std >= 0.0f) || !std::isfinite(noise_std))
    throw ConfigError("ce: noise_std must be finite and >= 0");
  if (!(rho >= 0.0f && rho < 1.0f)) throw ConfigError("ce: rho must lie in [0, 1)");
}

SpectrumTensor dct2(const Array& image) {
  check_image(image, "dct2");
  return SpectrumTensor{separable(image, false)};
}

Array idct2(const SpectrumTensor& spectrum) {
  check_image(spectrum.coeffs, "idct2");
  return separable(spectrum.coeffs, true);
}

EnergyMap energy_map(const SpectrumTensor& spectrum) {
  const Array& s = spectrum.coeffs;
  check_image(s, "energy_map");
  const std::size_t c = s.shape[0], plane = s.shape[1] * s.shape[2];
  Array e(s.shape, 0.0f);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float* x = s.data.data() + ch * plane;
    float lo = std::abs(x[0]), hi = lo;
    for (std::size_t k = 1; k < plane; ++k) {
      lo = std::min(lo, std::abs(x[k]));
      hi = std::max(hi, std::abs(x[k]));
    }
    if (!(hi > lo)) continue;
    const float range = hi - lo;
    float* out = e.data.data() + ch * plane;
    for (std::size_t k = 0; k < plane; ++k)
      out[k] = std::clamp((std::abs(x[k]) - lo) / range, 0.0f, 1.0f);
  }
  return EnergyMap{std::move(e)};
}

SpectrumTensor enhance(const SpectrumTensor& spectrum, const EnergyMap& energy, float gamma) {
  if (spectrum.coeffs.shape != energy.values.shape)
    throw ShapeError("enhance: shapes " + shape_str(spectrum.coeffs.shape) + " and " +
                     shape_str(energy.values.shape) + " do not conform");
  Array out = spectrum.coeffs;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] *= 1.0f + gamma * energy.values[k];
  return SpectrumTensor{std::move(out)};
}

Array sample_mask(const Shape& shape, float rho, Rng& rng) {
  if (!(rho >= 0.0f && rho < 1.0f)) throw ConfigError("sample_mask: rho must lie in [0, 1)");
  Array m(shape, 1.0f);
  if (rho == 0.0f) return m;
  for (auto& v : m.data) v = rng.uniform(1.0f - rho, 1.0f + rho);
  return m;
}

CeSample ce_sample(const Array& x_clean, const Array& delta, const CeConfig& config, Rng& rng) {
  config.validate();
  if (x_clean.shape != delta.shape)
    throw ShapeError("ce_transform: shapes " + shape_str(x_clean.shape) + " and " +
                     shape_str(delta.shape) + " do not conform");
  Array x = x_clean;
  for (std::size_t k = 0; k < x.size(); ++k) x[k] += delta[k];
  if (config.noise_std > 0.0f)
    for (auto& v : x.data) v += static_cast<float>(config.noise_std * rng.normal());

  const SpectrumTensor spec = dct2(x);
  const EnergyMap energy = energy_map(spec);
  SpectrumTensor enhanced = enhance(spec, energy, config.gamma);
  const Array mask = sample_mask(x.shape, config.rho, rng);

  Array gain(x.shape);
  for (std::size_t k = 0; k < gain.size(); ++k) {
    gain[k] = (1.0f + config.gamma * energy.values[k]) * mask[k];
    enhanced.coeffs[k] *= mask[k];
  }
  return CeSample{idct2(enhanced), std::move(gain)};
}

Array ce_transform(const Array& x_clean, const Array& delta, const CeConfig& config, Rng& rng) {
  return ce_sample(x_clean, delta, config, rng).image;
}

Array ce_backward(const Array& grad_out, const Array& gain) {
  if (grad_out.shape != gain.shape)
    throw ShapeError("ce_backward: shapes " + shape_str(grad_out.shape) + " and " +
                     shape_str(gain.shape) + " do not conform");
  SpectrumTensor s = dct2(grad_out);
  for (std::size_t k = 0; k < gain.size(); ++k) s.coeffs[k] *= gain[k];
  return idct2(s);
}

}  // namespace cogo
