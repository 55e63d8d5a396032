#pragma once

#include "cogo/rng.hpp"
#include "cogo/tensor.hpp"

namespace cogo {

/// Orthonormal 2D DCT-II coefficients, shaped (C,H,W).
struct SpectrumTensor {
  Array coeffs;
};

/// Per-channel min-max normalized coefficient magnitudes, shaped (C,H,W).
struct EnergyMap {
  Array values;
};

/// Commonality-enhancement parameters. `noise_std` is in pixel units for
/// images in [0,1]; the mask is elementwise Uniform[1-rho, 1+rho].
struct CeConfig {
  float gamma = 1.0f;
  float noise_std = 8.0f / 255.0f;
  float rho = 0.5f;

  /// True when the transform reduces to the identity on its input.
  bool is_identity() const { return gamma == 0.0f && noise_std == 0.0f && rho == 0.0f; }
  void validate() const;
};

SpectrumTensor dct2(const Array& image);
Array idct2(const SpectrumTensor& spectrum);
EnergyMap energy_map(const SpectrumTensor& spectrum);
/// out[k] = coeffs[k] * (1 + gamma * E[k]); sign of each coefficient is kept.
SpectrumTensor enhance(const SpectrumTensor& spectrum, const EnergyMap& energy, float gamma);
Array sample_mask(const Shape& shape, float rho, Rng& rng);

/// One draw of the enhancement pipeline together with the per-coefficient
/// gain (1 + gamma*E) * M it applied.
struct CeSample {
  Array image;
  Array gain;
};

/// Draws noise first (C*H*W normals), then the mask (C*H*W uniforms).
CeSample ce_sample(const Array& x_clean, const Array& delta, const CeConfig& config, Rng& rng);

/// IDCT(enhance(DCT(x_clean + delta + noise)) * M). Not clipped.
Array ce_transform(const Array& x_clean, const Array& delta, const CeConfig& config, Rng& rng);

/// Vector-Jacobian product of the pipeline w.r.t. its input with the energy
/// map and mask held fixed: IDCT(gain * DCT(grad_out)).
Array ce_backward(const Array& grad_out, const Array& gain);

}  // namespace cogo
