#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cogo/rng.hpp"

namespace cogo {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major f32 array with value semantics. Used for images,
/// spectra and gradients outside the autodiff graph.
struct Array {
  Shape shape;
  std::vector<float> data;

  Array() = default;
  explicit Array(Shape s, float fill = 0.0f);
  /// Throws ShapeError unless product(s) == d.size().
  Array(Shape s, std::vector<float> d);

  std::size_t size() const { return data.size(); }
  float& operator[](std::size_t i) { return data[i]; }
  float operator[](std::size_t i) const { return data[i]; }
  std::span<float> span() { return data; }
  std::span<const float> span() const { return data; }
  bool all_finite() const;

  friend bool operator==(const Array&, const Array&) = default;
};

/// Gradient transform applied to a node's incoming gradient during backward.
/// The returned array must have the same shape as the argument.
using GradHook = std::function<Array(const Array&)>;

class Tape;

/// Handle to a node of a Tape. Cheap to copy. A handle becomes stale when
/// its tape is reset; using a stale handle throws StaleHandleError.
class Tensor {
 public:
  Tensor() = default;

  const Shape& shape() const;
  const Array& value() const;
  /// Gradient after backward, or nullptr when the node carries none.
  const Array* grad() const;
  bool requires_grad() const;
  std::uint32_t node_id() const { return index_; }
  Tape& tape() const;
  bool valid() const;

 private:
  friend class Tape;
  Tensor(Tape* tape, std::uint32_t index, std::uint64_t generation)
      : tape_(tape), index_(index), generation_(generation) {}

  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
  std::uint64_t generation_ = 0;
};

struct HookHandle {
  std::uint64_t id = 0;
  std::uint32_t node = 0;
  std::uint64_t generation = 0;
};

/// Define-by-run reverse-mode tape.
///
/// Nodes are appended in creation order, which is a topological order, so
/// backward is a single reverse sweep. Hooks on a node see the node's fully
/// accumulated gradient and run in registration order before the gradient
/// propagates to the node's inputs.
class Tape {
 public:
  /// Accumulates into parent gradients given the node's output value and
  /// output gradient.
  using BackwardFn = std::function<void(Tape&, const Array& out, const Array& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor leaf(Array value, bool requires_grad = false);
  Tensor record(Array value, std::span<const Tensor> parents, BackwardFn backward);

  /// loss must hold exactly one element.
  void backward(const Tensor& loss);

  HookHandle register_hook(const Tensor& node, GradHook hook);
  void remove_hook(const HookHandle& handle);

  /// Drops every node; outstanding handles become stale.
  void reset();
  void zero_grad();

  std::size_t size() const { return nodes_.size(); }
  std::uint64_t generation() const { return generation_; }

  // Accessors used by op implementations.
  const Array& value_of(std::uint32_t node) const { return nodes_[node].value; }
  /// Gradient accumulator of `node`, allocated on first use; nullptr when
  /// the node does not require grad.
  float* grad_slot(std::uint32_t node);

 private:
  friend class Tensor;
  struct Node {
    Array value;
    Array grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
    std::vector<std::pair<std::uint64_t, GradHook>> hooks;
  };

  void check(const Tensor& t) const;
  const Node& node(const Tensor& t) const;

  std::deque<Node> nodes_;  // deque: value() references survive later ops
  std::uint64_t generation_ = 1;
  std::uint64_t next_hook_id_ = 1;
};

// ---------------------------------------------------------------------------
// Primitive ops. No implicit broadcasting: operands of elementwise ops must
// have identical shapes; use reshape/expand explicitly.

/// (M,K)x(K,N) -> (M,N), or batched (B,M,K)x(B,K,N) -> (B,M,N).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
Tensor reshape(const Tensor& a, Shape shape);
Tensor permute(const Tensor& a, std::span<const std::size_t> axes);
Tensor transpose(const Tensor& a, std::size_t axis0, std::size_t axis1);
/// Tiles `a` along a new leading axis of extent n: shape S -> (n, S...).
Tensor expand(const Tensor& a, std::size_t n);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor softmax(const Tensor& a, std::size_t axis);
/// Normalizes over the last axis; gamma and beta have the last axis' extent.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);
/// Exact (erf) GELU.
Tensor gelu(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Mean cross-entropy of (B,C) logits against B integer labels.
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);
/// Inverted dropout with keep-mask drawn from rng.
Tensor dropout(const Tensor& a, float p, Rng& rng);
/// Patch extraction from channels-last (B,H,W,C) input:
/// -> (B*Ho*Wo, k*k*C), columns ordered (ky, kx, c), zero padding.
Tensor im2col(const Tensor& x, std::size_t kernel, std::size_t stride, std::size_t padding);

}  // namespace cogo
