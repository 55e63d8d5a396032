#pragma once

#include <filesystem>

#include "cogo/tensor.hpp"

namespace cogo {

/// Writes a (3,H,W) image with values in [0,1] as 8-bit RGB PNG.
void write_png_rgb(const std::filesystem::path& path, const Array& image);
/// Writes an (H,W) map with values in [0,1] as 8-bit grayscale PNG.
void write_png_gray(const std::filesystem::path& path, const Array& map);
/// Reads an 8-bit PNG (gray or RGB, alpha dropped) as (3,H,W) in [0,1].
Array read_png(const std::filesystem::path& path);

/// Nearest 8-bit level, as stored in PNG files.
inline float quantize8(float v) {
  const float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
  return static_cast<float>(static_cast<int>(c * 255.0f + 0.5f)) / 255.0f;
}

}  // namespace cogo
