#include "cogo/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>
#include <sstream>

#include "cogo/error.hpp"

namespace cogo {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMat = Eigen::Map<const RowMat>;
using MutMat = Eigen::Map<RowMat>;

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                   " do not conform");
}

[[noreturn]] void bad_shape(const char* op, const Shape& a, const std::string& why) {
  throw ShapeError(std::string(op) + ": shape " + shape_str(a) + " " + why);
}

Tape& same_tape(const Tensor& a, const Tensor& b) {
  if (&a.tape() != &b.tape()) throw ShapeError("operands belong to different tapes");
  return a.tape();
}

// Splits `shape` around `axis` into (outer, extent, inner).
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

// out index -> in index for a permutation.
std::vector<std::size_t> permutation_map(const Shape& in, std::span<const std::size_t> axes) {
  const std::size_t rank = in.size();
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_stride[i - 1] = in_stride[i] * in[i];
  Shape out(rank);
  std::vector<std::size_t> step(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    out[i] = in[axes[i]];
    step[i] = in_stride[axes[i]];
  }
  const std::size_t n = numel(in);
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t src = 0;
  for (std::size_t k = 0; k < n; ++k) {
    map[k] = src;
    for (std::size_t d = rank; d-- > 0;) {
      ++idx[d];
      src += step[d];
      if (idx[d] < out[d]) break;
      src -= step[d] * out[d];
      idx[d] = 0;
    }
  }
  return map;
}

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

Array::Array(Shape s, float fill) : shape(std::move(s)), data(numel(shape), fill) {}

Array::Array(Shape s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
  if (numel(shape) != data.size())
    throw ShapeError("array of shape " + shape_str(shape) + " cannot hold " +
                     std::to_string(data.size()) + " values");
}

bool Array::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](float v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// Tensor

const Shape& Tensor::shape() const { return value().shape; }

const Array& Tensor::value() const { return tape().node(*this).value; }

const Array* Tensor::grad() const {
  const auto& n = tape().node(*this);
  return n.has_grad ? &n.grad : nullptr;
}

bool Tensor::requires_grad() const { return tape().node(*this).requires_grad; }

Tape& Tensor::tape() const {
  if (!tape_) throw StaleHandleError("tensor handle is not bound to a tape");
  tape_->check(*this);
  return *tape_;
}

bool Tensor::valid() const {
  return tape_ && generation_ == tape_->generation_ && index_ < tape_->nodes_.size();
}

// ---------------------------------------------------------------------------
// Tape

void Tape::check(const Tensor& t) const {
  if (t.tape_ != this) throw StaleHandleError("tensor handle belongs to another tape");
  if (t.generation_ != generation_ || t.index_ >= nodes_.size())
    throw StaleHandleError("stale tensor handle: node " + std::to_string(t.index_) +
                           " from a graph that has been reset");
}

const Tape::Node& Tape::node(const Tensor& t) const {
  check(t);
  return nodes_[t.index_];
}

Tensor Tape::leaf(Array value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<std::uint32_t>(nodes_.size() - 1), generation_);
}

Tensor Tape::record(Array value, std::span<const Tensor> parents, BackwardFn backward) {
  bool rg = false;
  for (const auto& p : parents) {
    check(p);
    rg = rg || nodes_[p.index_].requires_grad;
  }
  Node n;
  n.value = std::move(value);
  n.requires_grad = rg;
  if (rg) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<std::uint32_t>(nodes_.size() - 1), generation_);
}

float* Tape::grad_slot(std::uint32_t index) {
  Node& n = nodes_[index];
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    n.grad = Array(n.value.shape, 0.0f);
    n.has_grad = true;
  }
  return n.grad.data.data();
}

void Tape::backward(const Tensor& loss) {
  check(loss);
  if (nodes_[loss.index_].value.size() != 1)
    throw ShapeError("backward: loss must be scalar, got shape " +
                     shape_str(nodes_[loss.index_].value.shape));
  for (std::uint32_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].requires_grad && !nodes_[i].backward) grad_slot(i);
  if (float* g = grad_slot(loss.index_)) g[0] += 1.0f;

  for (std::uint32_t i = loss.index_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad) continue;
    for (auto& [id, hook] : n.hooks) {
      Array out = hook(n.grad);
      if (out.shape != n.grad.shape)
        throw ShapeError("gradient hook changed shape " + shape_str(n.grad.shape) + " to " +
                         shape_str(out.shape));
      n.grad = std::move(out);
    }
    if (n.backward) n.backward(*this, n.value, n.grad);
  }
}

HookHandle Tape::register_hook(const Tensor& t, GradHook hook) {
  check(t);
  if (!hook) throw ConfigError("register_hook: empty hook");
  const std::uint64_t id = next_hook_id_++;
  nodes_[t.index_].hooks.emplace_back(id, std::move(hook));
  return HookHandle{id, t.index_, generation_};
}

void Tape::remove_hook(const HookHandle& h) {
  if (h.generation != generation_ || h.node >= nodes_.size())
    throw StaleHandleError("stale hook handle");
  auto& hooks = nodes_[h.node].hooks;
  auto it = std::find_if(hooks.begin(), hooks.end(), [&](const auto& p) { return p.first == h.id; });
  if (it == hooks.end()) throw StaleHandleError("hook already removed");
  hooks.erase(it);
}

void Tape::reset() {
  nodes_.clear();
  ++generation_;
}

void Tape::zero_grad() {
  for (auto& n : nodes_) {
    n.grad = Array();
    n.has_grad = false;
  }
}

// ---------------------------------------------------------------------------
// Ops

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tape& tape = same_tape(a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  std::size_t batch = 1, m, k, n;
  if (sa.size() == 2 && sb.size() == 2 && sa[1] == sb[0]) {
    m = sa[0], k = sa[1], n = sb[1];
  } else if (sa.size() == 3 && sb.size() == 3 && sa[0] == sb[0] && sa[2] == sb[1]) {
    batch = sa[0], m = sa[1], k = sa[2], n = sb[2];
  } else {
    shape_mismatch("matmul", sa, sb);
  }
  Shape out_shape = sa.size() == 2 ? Shape{m, n} : Shape{batch, m, n};
  Array out(out_shape);
  const float* pa = a.value().data.data();
  const float* pb = b.value().data.data();
  for (std::size_t i = 0; i < batch; ++i) {
    MutMat(out.data.data() + i * m * n, m, n).noalias() =
        ConstMat(pa + i * m * k, m, k) * ConstMat(pb + i * k * n, k, n);
  }
  const auto ia = a.node_id(), ib = b.node_id();
  const Tensor parents[] = {a, b};
  return tape.record(std::move(out), parents, [=](Tape& t, const Array&, const Array& g) {
    const float* va = t.value_of(ia).data.data();
    const float* vb = t.value_of(ib).data.data();
    float* ga = t.grad_slot(ia);
    float* gb = t.grad_slot(ib);
    for (std::size_t i = 0; i < batch; ++i) {
      ConstMat gout(g.data.data() + i * m * n, m, n);
      if (ga) MutMat(ga + i * m * k, m, k).noalias() += gout * ConstMat(vb + i * k * n, k, n).transpose();
      if (gb) MutMat(gb + i * k * n, k, n).noalias() += ConstMat(va + i * m * k, m, k).transpose() * gout;
    }
  });
}

namespace {

template <class Fwd, class Bwd>
Tensor elementwise2(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, Bwd bwd) {
  Tape& tape = same_tape(a, b);
  if (a.shape() != b.shape()) shape_mismatch(name, a.shape(), b.shape());
  const auto& va = a.value().data;
  const auto& vb = b.value().data;
  Array out(a.shape());
  for (std::size_t i = 0; i < va.size(); ++i) out.data[i] = fwd(va[i], vb[i]);
  const auto ia = a.node_id(), ib = b.node_id();
  const Tensor parents[] = {a, b};
  return tape.record(std::move(out), parents, [=](Tape& t, const Array&, const Array& g) {
    const auto& xa = t.value_of(ia).data;
    const auto& xb = t.value_of(ib).data;
    float* ga = t.grad_slot(ia);
    float* gb = t.grad_slot(ib);
    for (std::size_t i = 0; i < g.size(); ++i) bwd(xa[i], xb[i], g.data[i], ga ? ga + i : nullptr, gb ? gb + i : nullptr);
  });
}

// Any op whose backward is a pure index scatter: grad_in[map[k]] += grad_out[k].
Tensor gather_op(const Tensor& a, Shape out_shape, std::vector<std::size_t> map) {
  const auto& va = a.value().data;
  Array out(std::move(out_shape));
  for (std::size_t k = 0; k < map.size(); ++k) out.data[k] = va[map[k]];
  const auto ia = a.node_id();
  auto shared = std::make_shared<std::vector<std::size_t>>(std::move(map));
  const Tensor parents[] = {a};
  return a.tape().record(std::move(out), parents, [=](Tape& t, const Array&, const Array& g) {
    float* ga = t.grad_slot(ia);
    if (!ga) return;
    const auto& m = *shared;
    for (std::size_t k = 0; k < m.size(); ++k) ga[m[k]] += g.data[k];
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise2(
      "add", a, b, [](float x, float y) { return x + y; },
      [](float, float, float g, float* ga, float* gb) {
        if (ga) *ga += g;
        if (gb) *gb += g;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise2(
      "mul", a, b, [](float x, float y) { return x * y; },
      [](float x, float y, float g, float* ga, float* gb) {
        if (ga) *ga += g * y;
        if (gb) *gb += g * x;
      });
}

Tensor scale(const Tensor& a, float s) {
  Array out = a.value();
  for (auto& v : out.data) v *= s;
  const auto ia = a.node_id();
  const Tensor parents[] = {a};
  return a.tape().record(std::move(out), parents, [=](Tape& t, const Array&, const Array& g) {
    if (float* ga = t.grad_slot(ia))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g.data[i];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.value().size()) shape_mismatch("reshape", a.shape(), shape);
  Array out(std::move(shape), a.value().data);
  const auto ia = a.node_id();
  const Tensor parents[] = {a};
  return a.tape().record(std::move(out), parents, [=](Tape& t, const Array&, const Array& g) {
    if (float* ga = t.grad_slot(ia))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g.data[i];
  });
}

Tensor permute(const Tensor& a, std::span<const std::size_t> axes) {
  const Shape& s = a.shape();
  if (axes.size() != s.size()) bad_shape("permute", s, "does not match axis list length");
  std::vector<bool> seen(s.size(), false);
  for (auto ax : axes) {
    if (ax >= s.size() || seen[ax]) bad_shape("permute", s, "given an invalid axis permutation");
    seen[ax] = true;
  }
  Shape out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[axes[i]];
  return gather_op(a, std::move(out), permutation_map(s, axes));
}

Tensor transpose(const Tensor& a, std::size_t axis0, std::size_t axis1) {
  const Shape& s = a.shape();
  if (axis0 >= s.size() || axis1 >= s.size()) bad_shape("transpose", s, "has no such axis");
  std::vector<std::size_t> axes(s.size());
  std::iota(axes.begin(), axes.end(), 0);
  std::swap(axes[axis0], axes[axis1]);
  return permute(a, axes);
}

Tensor expand(const Tensor& a, std::size_t n) {
  if (n == 0) bad_shape("expand", a.shape(), "cannot expand to zero copies");
  Shape out{n};
  out.insert(out.end(), a.shape().begin(), a.shape().end());
  const std::size_t m = a.value().size();
  std::vector<std::size_t> map(n * m);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < m; ++i) map[r * m + i] = i;
  return gather_op(a, std::move(out), std::move(map));
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& s = a.shape();
  if (axis >= s.size() || length == 0 || start + length > s[axis])
    bad_shape("slice", s, "cannot be sliced at axis " + std::to_string(axis) + " [" +
                              std::to_string(start) + ", " + std::to_string(start + length) + ")");
  const AxisSplit sp = split_axis(s, axis);
  Shape out = s;
  out[axis] = length;
  std::vector<std::size_t> map;
  map.reserve(sp.outer * length * sp.inner);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t e = start; e < start + length; ++e)
      for (std::size_t i = 0; i < sp.inner; ++i) map.push_back((o * sp.extent + e) * sp.inner + i);
  return gather_op(a, std::move(out), std::move(map));
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  Tape& tape = parts[0].tape();
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size()) bad_shape("concat", s0, "has no axis " + std::to_string(axis));
  Shape out = s0;
  out[axis] = 0;
  for (const auto& p : parts) {
    same_tape(parts[0], p);
    const Shape& s = p.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == s0[d];
    if (!ok) shape_mismatch("concat", s0, s);
    out[axis] += s[axis];
  }
  const AxisSplit sp = split_axis(out, axis);
  Array value(out);
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto& v = p.value().data;
    const std::size_t ext = p.shape()[axis];
    for (std::size_t o = 0; o < sp.outer; ++o)
      std::copy_n(v.begin() + o * ext * sp.inner, ext * sp.inner,
                  value.data.begin() + (o * sp.extent + offset) * sp.inner);
    ids.push_back(p.node_id());
    offsets.push_back(offset);
    offset += ext;
  }
  std::vector<std::size_t> extents;
  for (const auto& p : parts) extents.push_back(p.shape()[axis]);
  return tape.record(std::move(value), parts, [=](Tape& t, const Array&, const Array& g) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      float* gp = t.grad_slot(ids[k]);
      if (!gp) continue;
      const std::size_t ext = extents[k];
      for (std::size_t o = 0; o < sp.outer; ++o) {
        const float* src = g.data.data() + (o * sp.extent + offsets[k]) * sp.inner;
        float* dst = gp + o * ext * sp.inner;
        for (std::size_t i = 0; i < ext * sp.inner; ++i) dst[i] += src[i];
      }
    }
  });
}


Tensor softmax(const Tensor& a, std::size_t axis) {
  const Shape& s = a.shape();
  if (axis >= s.size()) bad_shape("softmax", s, "has no axis " + std::to_string(axis));
  const AxisSplit sp = split_axis(s, axis);
  const auto& v = a.value().data;
  Array out(s);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const std::size_t base = o * sp.extent * sp.inner + i;
      float mx = v[base];
      for (std::size_t e = 1; e < sp.extent; ++e) mx = std::max(mx, v[base + e * sp.inner]);
      double z = 0.0;
      for (std::size_t e = 0; e < sp.extent; ++e) {
        const float ex = std::exp(v[base + e * sp.inner] - mx);
        out.data[base + e * sp.inner] = ex;
        z += ex;
      }
      const float inv = static_cast<float>(1.0 / z);
      for (std::size_t e = 0; e < sp.extent; ++e) out.data[base + e * sp.inner] *= inv;
    }
  }
  const auto ia = a.node_id();
  const Tensor parents[] = {a};
  return a.tape().record(std::move(out), parents, [=](Tape& t, const Array& y, const Array& g) {
    float* ga = t.grad_slot(ia);
    if (!ga) return;
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const std::size_t base = o * sp.extent * sp.inner + i;
        double dot = 0.0;
        for (std::size_t e = 0; e < sp.extent; ++e) {
          const std::size_t k = base + e * sp.inner;
          dot += static_cast<double>(g.data[k]) * y.data[k];
        }
        const float fdot = static_cast<float>(dot);
        for (std::size_t e = 0; e < sp.extent; ++e) {
          const std::size_t k = base + e * sp.inner;
          ga[k] += y.data[k] * (g.data[k] - fdot);
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps) {
  same_tape(x, gamma);
  same_tape(x, beta);
  const Shape& s = x.shape();
  if (s.empty()) bad_shape("layer_norm", s, "has no feature axis");
  const std::size_t d = s.back();
  if (gamma.shape() != Shape{d}) shape_mismatch("layer_norm", s, gamma.shape());
  if (beta.shape() != Shape{d}) shape_mismatch("layer_norm", s, beta.shape());
  const std::size_t rows = x.value().size() / d;
  const auto& xv = x.value().data;
  const auto& gv = gamma.value().data;
  const auto& bv = beta.value().data;
  auto xhat = std::make_shared<std::vector<float>>(xv.size());
  auto rstd = std::make_shared<std::vector<float>>(rows);
  Array out(s);
  for (std::size_t r = 0; r < rows; ++r) {
    const float* row = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const float rs = static_cast<float>(1.0 / std::sqrt(var + eps));
    (*rstd)[r] = rs;
    for (std::size_t j = 0; j < d; ++j) {
      const float h = static_cast<float>(row[j] - mu) * rs;
      (*xhat)[r * d + j] = h;
      out.data[r * d + j] = h * gv[j] + bv[j];
    }
  }
  const auto ix = x.node_id(), ig = gamma.node_id(), ib = beta.node_id();
  const Tensor parents[] = {x, gamma, beta};
  return x.tape().record(std::move(out), parents, [=](Tape& t, const Array&, const Array& g) {
    const auto& gam = t.value_of(ig).data;
    float* gx = t.grad_slot(ix);
    float* gg = t.grad_slot(ig);
    float* gb = t.grad_slot(ib);
    std::vector<float> dxhat(d);
    for (std::size_t r = 0; r < rows; ++r) {
      const float* gr = g.data.data() + r * d;
      const float* hr = xhat->data() + r * d;
      if (gg)
        for (std::size_t j = 0; j < d; ++j) gg[j] += gr[j] * hr[j];
      if (gb)
        for (std::size_t j = 0; j < d; ++j) gb[j] += gr[j];
      if (!gx) continue;
      double m1 = 0.0, m2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        dxhat[j] = gr[j] * gam[j];
        m1 += dxhat[j];
        m2 += static_cast<double>(dxhat[j]) * hr[j];
      }
      const float f1 = static_cast<float>(m1 / static_cast<double>(d));
      const float f2 = static_cast<float>(m2 / static_cast<double>(d));
      const float rs = (*rstd)[r];
      for (std::size_t j = 0; j < d; ++j) gx[r * d + j] += rs * (dxhat[j] - f1 - hr[j] * f2);
    }
  });
}

Tensor gelu(const Tensor& a) {
  constexpr float kInvSqrt2 = static_cast<float>(1.0 / std::numbers::sqrt2);
  const float kInvSqrt2Pi = static_cast<float>(1.0 / std::sqrt(2.0 * std::numbers::pi));
  Array out = a.value();
  for (auto& v : out.data) v = 0.5f * v * (1.0f + std::erf(v * kInvSqrt2));
  const auto ia = a.node_id();
  const Tensor parents[] = {a};
  return a.tape().record(std::move(out), parents, [=](Tape& t, const Array&, const Array& g) {
    float* ga = t.grad_slot(ia);
    if (!ga) return;
    const auto& x = t.value_of(ia).data;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const float cdf = 0.5f * (1.0f + std::erf(x[i] * kInvSqrt2));
      const float pdf = kInvSqrt2Pi * std::exp(-0.5f * x[i] * x[i]);
      ga[i] += g.data[i] * (cdf + x[i] * pdf);
    }
  });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (float v : a.value().data) acc += v;
  const auto ia = a.node_id();
  const Tensor parents[] = {a};
  return a.tape().record(Array({1}, {static_cast<float>(acc)}), parents,
                         [=](Tape& t, const Array&, const Array& g) {
                           float* ga = t.grad_slot(ia);
                           if (!ga) return;
                           const std::size_t n = t.value_of(ia).size();
                           for (std::size_t i = 0; i < n; ++i) ga[i] += g.data[0];
                         });
}

Tensor mean(const Tensor& a) {
  const std::size_t n = a.value().size();
  double acc = 0.0;
  for (float v : a.value().data) acc += v;
  const auto ia = a.node_id();
  const Tensor parents[] = {a};
  return a.tape().record(Array({1}, {static_cast<float>(acc / static_cast<double>(n))}), parents,
                         [=](Tape& t, const Array&, const Array& g) {
                           float* ga = t.grad_slot(ia);
                           if (!ga) return;
                           const float w = g.data[0] / static_cast<float>(n);
                           for (std::size_t i = 0; i < n; ++i) ga[i] += w;
                         });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const Shape& s = logits.shape();
  if (s.size() != 2 || s[0] != labels.size())
    bad_shape("cross_entropy", s, "does not match " + std::to_string(labels.size()) + " labels");
  const std::size_t b = s[0], c = s[1];
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= c)
      throw ConfigError("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                        std::to_string(c) + ")");
  const auto& z = logits.value().data;
  auto probs = std::make_shared<std::vector<float>>(z.size());
  double total = 0.0;
  for (std::size_t r = 0; r < b; ++r) {
    const float* row = z.data() + r * c;
    const float mx = *std::max_element(row, row + c);
    double se = 0.0;
    for (std::size_t j = 0; j < c; ++j) se += std::exp(static_cast<double>(row[j] - mx));
    const double lse = mx + std::log(se);
    total += lse - row[labels[r]];
    for (std::size_t j = 0; j < c; ++j)
      (*probs)[r * c + j] = static_cast<float>(std::exp(row[j] - lse));
  }
  std::vector<int> ys(labels.begin(), labels.end());
  const auto il = logits.node_id();
  const Tensor parents[] = {logits};
  return logits.tape().record(
      Array({1}, {static_cast<float>(total / static_cast<double>(b))}), parents,
      [=](Tape& t, const Array&, const Array& g) {
        float* gl = t.grad_slot(il);
        if (!gl) return;
        const float w = g.data[0] / static_cast<float>(b);
        for (std::size_t r = 0; r < b; ++r)
          for (std::size_t j = 0; j < c; ++j)
            gl[r * c + j] += w * ((*probs)[r * c + j] - (static_cast<int>(j) == ys[r] ? 1.0f : 0.0f));
      });
}

Tensor dropout(const Tensor& a, float p, Rng& rng) {
  if (!(p >= 0.0f && p < 1.0f)) throw ConfigError("dropout: p must lie in [0, 1)");
  const std::size_t n = a.value().size();
  auto mask = std::make_shared<std::vector<float>>(n, 1.0f);
  if (p > 0.0f) {
    const float keep = 1.0f / (1.0f - p);
    for (auto& m : *mask) m = rng.uniform() >= p ? keep : 0.0f;
  }
  Array out = a.value();
  for (std::size_t i = 0; i < n; ++i) out.data[i] *= (*mask)[i];
  const auto ia = a.node_id();
  const Tensor parents[] = {a};
  return a.tape().record(std::move(out), parents, [=](Tape& t, const Array&, const Array& g) {
    if (float* ga = t.grad_slot(ia))
      for (std::size_t i = 0; i < n; ++i) ga[i] += g.data[i] * (*mask)[i];
  });
}

Tensor im2col(const Tensor& x, std::size_t kernel, std::size_t stride, std::size_t padding) {
  const Shape& s = x.shape();
  if (s.size() != 4) bad_shape("im2col", s, "is not (B,H,W,C)");
  if (kernel == 0 || stride == 0) throw ConfigError("im2col: kernel and stride must be positive");
  const std::size_t b = s[0], h = s[1], w = s[2], c = s[3];
  if (h + 2 * padding < kernel || w + 2 * padding < kernel)
    bad_shape("im2col", s, "is smaller than the kernel");
  const std::size_t ho = (h + 2 * padding - kernel) / stride + 1;
  const std::size_t wo = (w + 2 * padding - kernel) / stride + 1;
  const std::size_t cols = kernel * kernel * c;
  // Map each output element to a source index; padding maps to npos.
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  auto map = std::make_shared<std::vector<std::size_t>>(b * ho * wo * cols, npos);
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const std::size_t row = (bi * ho + oy) * wo + ox;
        for (std::size_t ky = 0; ky < kernel; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kx = 0; kx < kernel; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            for (std::size_t ci = 0; ci < c; ++ci)
              (*map)[row * cols + (ky * kernel + kx) * c + ci] =
                  ((bi * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)) * c + ci;
          }
        }
      }
  const auto& xv = x.value().data;
  Array out({b * ho * wo, cols});
  for (std::size_t k = 0; k < map->size(); ++k)
    if ((*map)[k] != npos) out.data[k] = xv[(*map)[k]];
  const auto ix = x.node_id();
  const Tensor parents[] = {x};
  return x.tape().record(std::move(out), parents, [=](Tape& t, const Array&, const Array& g) {
    float* gx = t.grad_slot(ix);
    if (!gx) return;
    for (std::size_t k = 0; k < map->size(); ++k)
      if ((*map)[k] != npos) gx[(*map)[k]] += g.data[k];
  });
}

}  // namespace cogo
