#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cogo/tensor.hpp"

namespace cogo {

/// Labeled image batch: images (N,C,H,W) in [0,1], one label per image.
struct Dataset {
  Array images;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t image_numel() const;
  /// Single image as (C,H,W).
  Array image(std::size_t index) const;
  /// Stacks the selected images into (k,C,H,W).
  Array gather(std::span<const std::size_t> indices) const;
  std::vector<int> gather_labels(std::span<const std::size_t> indices) const;
  /// First `count` images (or all of them, when fewer).
  Dataset head(std::size_t count) const;
};

enum class Split { train, val, eval };

Split parse_split(const std::string& name);
std::string to_string(Split split);

inline constexpr int kNumClasses = 10;
inline constexpr std::size_t kImageSize = 32;

/// Name of a procedural class, e.g. "ring/striped".
std::string class_name(int label);

/// Renders `n_per_class` images of each of the 10 shape x texture classes.
/// Each split draws from its own stream of `seed`; pixels are quantized to
/// 8 bits so PNG export is lossless. Images are ordered class-interleaved.
Dataset generate_procedural(std::uint64_t seed, std::size_t n_per_class, Split split);

/// Writes images/NNNNN.png plus labels.csv (path,label) under `dir`.
void write_image_dir(const Dataset& data, const std::filesystem::path& dir);
/// Reads a directory produced by write_image_dir (or any labels.csv with
/// RGB PNGs of equal size).
Dataset load_image_dir(const std::filesystem::path& dir);

/// Resolves a dataset reference: either "procedural:SEED:N_PER_CLASS:SPLIT"
/// or a directory containing labels.csv.
Dataset load_dataset(const std::string& ref);

}  // namespace cogo
