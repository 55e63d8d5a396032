#pragma once

#include <cstdint>

namespace cogo {

/// Counter-based random generator.
///
/// Every draw is a pure function of (seed, stream, counter), so two
/// generators constructed with the same seed and stream produce the same
/// sequence on every platform. Per-image streams in the attack harness use
/// `stream = image_index`; independent purposes within one stream are
/// separated with `substream(tag)`.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 24 random bits (exactly representable as f32).
  float uniform();
  float uniform(float lo, float hi);

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Standard normal via Box-Muller (one output per call).
  double normal();

  /// Independent generator sharing this stream id, keyed by `tag`.
  Rng substream(std::uint64_t tag) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// SplitMix64 finalizer; exposed for deriving seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace cogo
