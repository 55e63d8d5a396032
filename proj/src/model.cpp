#include "cogo/model.hpp"

#include <algorithm>
#include <cmath>

#include "cogo/error.hpp"

namespace cogo {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::vit_tiny: return "vit_tiny";
    case Variant::deit_tiny: return "deit_tiny";
    case Variant::hybrid_tiny: return "hybrid_tiny";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "vit_tiny") return Variant::vit_tiny;
  if (name == "deit_tiny") return Variant::deit_tiny;
  if (name == "hybrid_tiny") return Variant::hybrid_tiny;
  throw ConfigError("unknown variant '" + std::string(name) + "' (valid: vit_tiny, deit_tiny, hybrid_tiny)");
}

std::string to_string(SiteKind k) {
  switch (k) {
    case SiteKind::qkv: return "qkv";
    case SiteKind::proj: return "proj";
    case SiteKind::attn_dropout: return "attn_dropout";
    case SiteKind::mlp: return "mlp";
  }
  return "?";
}

SiteKind parse_site_kind(std::string_view name) {
  if (name == "qkv") return SiteKind::qkv;
  if (name == "proj") return SiteKind::proj;
  if (name == "attn_dropout") return SiteKind::attn_dropout;
  if (name == "mlp") return SiteKind::mlp;
  throw ConfigError("unknown hook site '" + std::string(name) + "' (valid: qkv, proj, attn_dropout, mlp)");
}

std::vector<std::string> site_linear_layers(SiteKind kind) {
  switch (kind) {
    case SiteKind::qkv: return {"attn.qkv"};
    case SiteKind::proj: return {"attn.proj"};
    case SiteKind::attn_dropout: return {};
    case SiteKind::mlp: return {"mlp.fc1", "mlp.fc2"};
  }
  return {};
}

void ModelSpec::validate() const {
  if (image_size == 0 || patch_size == 0 || embed_dim == 0 || heads == 0 || depth == 0 || num_classes < 2 ||
      in_channels == 0 || mlp_hidden == 0)
    throw ConfigError("model spec: every extent must be positive");
  if (embed_dim % heads != 0) throw ConfigError("model spec: embed_dim must be divisible by heads");
  if (image_size % patch_size != 0) throw ConfigError("model spec: image_size must be divisible by patch_size");
  if (variant == Variant::hybrid_tiny && image_size % 4 != 0)
    throw ConfigError("model spec: hybrid_tiny needs image_size divisible by 4");
  if (!(dropout_p >= 0.0f && dropout_p < 1.0f)) throw ConfigError("model spec: dropout_p must lie in [0, 1)");
}

// ---------------------------------------------------------------------------

SiteHooks::Handle SiteHooks::add(const HookSite& site, GradHook hook) {
  if (!hook) throw ConfigError("SiteHooks::add: empty hook");
  const std::uint64_t id = next_id_++;
  entries_.push_back(Entry{id, site, std::move(hook)});
  return Handle{id};
}

void SiteHooks::remove(const Handle& handle) {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.id == handle.id; });
  if (it == entries_.end()) throw StaleHandleError("site hook handle is not registered");
  entries_.erase(it);
}

std::vector<GradHook> SiteHooks::hooks_for(const HookSite& site) const {
  std::vector<GradHook> out;
  for (const auto& e : entries_)
    if (e.site == site) out.push_back(e.hook);
  return out;
}

void SiteHooks::append(const SiteHooks& other) {
  for (const auto& e : other.entries_) entries_.push_back(Entry{next_id_++, e.site, e.hook});
}

// ---------------------------------------------------------------------------

Model::Model(ModelSpec spec, std::vector<Parameter> params) : spec_(std::move(spec)), params_(std::move(params)) {
  spec_.validate();
  const auto layout = parameter_layout(spec_);
  if (layout.size() != params_.size())
    throw ConfigError("model: expected " + std::to_string(layout.size()) + " parameters, got " +
                      std::to_string(params_.size()));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != layout[i].first)
      throw ConfigError("model: parameter " + std::to_string(i) + " is '" + params_[i].name + "', expected '" +
                        layout[i].first + "'");
    if (params_[i].value.shape != layout[i].second)
      throw ShapeError("model: parameter '" + params_[i].name + "' has shape " +
                       shape_str(params_[i].value.shape) + ", expected " + shape_str(layout[i].second));
    index_[params_[i].name] = i;
  }
}

TokenLayout Model::layout() const {
  TokenLayout t;
  const std::size_t side = spec_.image_size / spec_.patch_size;
  t.num_patch_tokens = side * side;
  if (spec_.variant == Variant::hybrid_tiny) t.num_patch_tokens = (spec_.image_size / 4) * (spec_.image_size / 4);
  t.class_token_index = 0;
  if (spec_.variant == Variant::deit_tiny) t.additional_token_index = 1;
  return t;
}

std::size_t Model::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("model has no parameter '" + name + "'");
  return it->second;
}

std::size_t Model::num_weights() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

namespace {

constexpr std::size_t kStemChannels = 32;

std::string block_prefix(std::size_t i) { return "blocks." + std::to_string(i) + "."; }

}  // namespace

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelSpec& s) {
  std::vector<std::pair<std::string, Shape>> out;
  const std::size_t d = s.embed_dim;
  std::size_t patches;
  if (s.variant == Variant::hybrid_tiny) {
    out.push_back({"stem.conv1.weight", {9 * s.in_channels, kStemChannels}});
    out.push_back({"stem.conv1.bias", {kStemChannels}});
    out.push_back({"stem.conv2.weight", {9 * kStemChannels, d}});
    out.push_back({"stem.conv2.bias", {d}});
    patches = (s.image_size / 4) * (s.image_size / 4);
  } else {
    out.push_back({"patch_embed.weight", {s.patch_size * s.patch_size * s.in_channels, d}});
    out.push_back({"patch_embed.bias", {d}});
    patches = (s.image_size / s.patch_size) * (s.image_size / s.patch_size);
  }
  const bool deit = s.variant == Variant::deit_tiny;
  out.push_back({"cls_token", {1, d}});
  if (deit) out.push_back({"dist_token", {1, d}});
  out.push_back({"pos_embed", {patches + (deit ? 2 : 1), d}});
  for (std::size_t i = 0; i < s.depth; ++i) {
    const std::string p = block_prefix(i);
    out.push_back({p + "norm1.weight", {d}});
    out.push_back({p + "norm1.bias", {d}});
    out.push_back({p + "attn.qkv.weight", {d, 3 * d}});
    out.push_back({p + "attn.qkv.bias", {3 * d}});
    out.push_back({p + "attn.proj.weight", {d, d}});
    out.push_back({p + "attn.proj.bias", {d}});
    out.push_back({p + "norm2.weight", {d}});
    out.push_back({p + "norm2.bias", {d}});
    out.push_back({p + "mlp.fc1.weight", {d, s.mlp_hidden}});
    out.push_back({p + "mlp.fc1.bias", {s.mlp_hidden}});
    out.push_back({p + "mlp.fc2.weight", {s.mlp_hidden, d}});
    out.push_back({p + "mlp.fc2.bias", {d}});
  }
  out.push_back({"norm.weight", {d}});
  out.push_back({"norm.bias", {d}});
  out.push_back({"head.weight", {d, s.num_classes}});
  out.push_back({"head.bias", {s.num_classes}});
  if (deit) {
    out.push_back({"head_dist.weight", {d, s.num_classes}});
    out.push_back({"head_dist.bias", {s.num_classes}});
  }
  return out;
}

Model build(const ModelSpec& spec, Rng& rng) {
  spec.validate();
  std::vector<Parameter> params;
  for (auto& [name, shape] : parameter_layout(spec)) {
    Array v(shape, 0.0f);
    auto ends_with = [&](std::string_view suffix) {
      return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (name == "cls_token" || name == "dist_token" || name == "pos_embed") {
      for (auto& x : v.data) x = static_cast<float>(0.02 * rng.normal());
    } else if (shape.size() == 2) {
      // Xavier-uniform for every linear weight.
      const float limit = std::sqrt(6.0f / static_cast<float>(shape[0] + shape[1]));
      for (auto& x : v.data) x = rng.uniform(-limit, limit);
    } else if (ends_with("norm1.weight") || ends_with("norm2.weight") || name == "norm.weight") {
      std::fill(v.data.begin(), v.data.end(), 1.0f);
    }
    params.push_back(Parameter{name, std::move(v)});
  }
  return Model(spec, std::move(params));
}

// ---------------------------------------------------------------------------

namespace {

class ForwardBuilder {
 public:
  ForwardBuilder(const Model& m, Tape& tape, const ForwardOptions& o, ForwardPass& fp)
      : m_(m), tape_(tape), o_(o), fp_(fp) {}

  Tensor p(const std::string& name) const { return fp_.params[m_.index_of(name)]; }

  Tensor linear(const Tensor& x2d, const std::string& name) const {
    Tensor y = matmul(x2d, p(name + ".weight"));
    return add(y, expand(p(name + ".bias"), x2d.shape()[0]));
  }

  Tensor site(std::size_t block, SiteKind kind, const Tensor& node) {
    fp_.sites[{block, kind}] = node;
    if (o_.hooks)
      for (auto& h : o_.hooks->hooks_for(HookSite{block, kind})) tape_.register_hook(node, std::move(h));
    return node;
  }

  Tensor attention(std::size_t i, const Tensor& x) {
    const auto& s = m_.spec();
    const std::string pre = block_prefix(i);
    const std::size_t b = x.shape()[0], n = x.shape()[1], d = s.embed_dim, h = s.heads, dk = s.head_dim();
    Tensor qkv = reshape(linear(reshape(x, {b * n, d}), pre + "attn.qkv"), {b, n, 3 * d});
    qkv = site(i, SiteKind::qkv, qkv);
    const std::size_t order[] = {2, 0, 3, 1, 4};
    Tensor split = reshape(permute(reshape(qkv, {b, n, 3, h, dk}), order), {3, b * h * n * dk});
    Tensor q = reshape(slice(split, 0, 0, 1), {b * h, n, dk});
    Tensor k = reshape(slice(split, 0, 1, 1), {b * h, n, dk});
    Tensor v = reshape(slice(split, 0, 2, 1), {b * h, n, dk});
    Tensor scores = scale(matmul(q, transpose(k, 1, 2)), 1.0f / std::sqrt(static_cast<float>(dk)));
    Tensor attn = reshape(softmax(scores, 2), {b, h, n, n});
    fp_.attention.push_back(attn);
    Tensor dropped = (o_.train && s.dropout_p > 0.0f) ? dropout(attn, s.dropout_p, *o_.dropout_rng)
                                                      : reshape(attn, {b, h, n, n});
    dropped = site(i, SiteKind::attn_dropout, dropped);
    Tensor ctx = matmul(reshape(dropped, {b * h, n, n}), v);
    const std::size_t back[] = {0, 2, 1, 3};
    ctx = reshape(permute(reshape(ctx, {b, h, n, dk}), back), {b * n, d});
    Tensor out = reshape(linear(ctx, pre + "attn.proj"), {b, n, d});
    return site(i, SiteKind::proj, out);
  }

  Tensor mlp(std::size_t i, const Tensor& x) {
    const std::string pre = block_prefix(i);
    const std::size_t b = x.shape()[0], n = x.shape()[1], d = x.shape()[2];
    Tensor hidden = gelu(linear(reshape(x, {b * n, d}), pre + "mlp.fc1"));
    Tensor out = reshape(linear(hidden, pre + "mlp.fc2"), {b, n, d});
    return site(i, SiteKind::mlp, out);
  }

  Tensor embed(const Tensor& images) {
    const auto& s = m_.spec();
    const std::size_t b = images.shape()[0], d = s.embed_dim;
    const std::size_t to_nhwc[] = {0, 2, 3, 1};
    Tensor x = permute(images, to_nhwc);
    Tensor tokens;
    if (s.variant == Variant::hybrid_tiny) {
      const std::size_t half = s.image_size / 2, quarter = s.image_size / 4;
      Tensor c1 = gelu(linear(im2col(x, 3, 2, 1), "stem.conv1"));
      c1 = reshape(c1, {b, half, half, kStemChannels});
      tokens = reshape(linear(im2col(c1, 3, 2, 1), "stem.conv2"), {b, quarter * quarter, d});
    } else {
      const std::size_t side = s.image_size / s.patch_size;
      tokens = reshape(linear(im2col(x, s.patch_size, s.patch_size, 0), "patch_embed"), {b, side * side, d});
    }
    std::vector<Tensor> parts{expand(p("cls_token"), b)};
    if (s.variant == Variant::deit_tiny) parts.push_back(expand(p("dist_token"), b));
    parts.push_back(tokens);
    Tensor seq = concat(parts, 1);
    return add(seq, expand(p("pos_embed"), b));
  }

  Tensor run(const Tensor& images) {
    const auto& s = m_.spec();
    Tensor x = embed(images);
    for (std::size_t i = 0; i < s.depth; ++i) {
      const std::string pre = block_prefix(i);
      x = add(x, attention(i, layer_norm(x, p(pre + "norm1.weight"), p(pre + "norm1.bias"))));
      x = add(x, mlp(i, layer_norm(x, p(pre + "norm2.weight"), p(pre + "norm2.bias"))));
    }
    x = layer_norm(x, p("norm.weight"), p("norm.bias"));
    const std::size_t b = x.shape()[0], d = s.embed_dim;
    Tensor logits = linear(reshape(slice(x, 1, 0, 1), {b, d}), "head");
    if (s.variant == Variant::deit_tiny) {
      Tensor extra = linear(reshape(slice(x, 1, 1, 1), {b, d}), "head_dist");
      logits = scale(add(logits, extra), 0.5f);
    }
    return logits;
  }

 private:
  const Model& m_;
  Tape& tape_;
  const ForwardOptions& o_;
  ForwardPass& fp_;
};

}  // namespace

ForwardPass forward(const Model& model, Tape& tape, const Array& images, const ForwardOptions& options) {
  const auto& s = model.spec();
  const Shape expected{images.shape.empty() ? 0 : images.shape[0], s.in_channels, s.image_size, s.image_size};
  if (images.shape.size() != 4 || images.shape != expected || images.shape[0] == 0)
    throw ShapeError("forward: image batch shape " + shape_str(images.shape) + " does not match (B," +
                     std::to_string(s.in_channels) + "," + std::to_string(s.image_size) + "," +
                     std::to_string(s.image_size) + ")");
  if (!images.all_finite()) throw NumericError("forward: non-finite input");
  if (options.train && s.dropout_p > 0.0f && !options.dropout_rng)
    throw ConfigError("forward: training mode needs a dropout rng");

  ForwardPass fp;
  fp.input = tape.leaf(images, options.input_grad);
  fp.params.reserve(model.params().size());
  for (const auto& p : model.params()) fp.params.push_back(tape.leaf(p.value, options.param_grads));
  ForwardBuilder builder(model, tape, options, fp);
  fp.logits = builder.run(fp.input);
  return fp;
}

Array predict_logits(const Model& model, const Array& images) {
  Tape tape;
  return forward(model, tape, images).logits.value();
}

std::vector<int> classify(const Model& model, const Array& images, std::size_t batch) {
  if (images.shape.size() != 4) throw ShapeError("classify: expected (B,C,H,W), got " + shape_str(images.shape));
  const std::size_t n = images.shape[0], m = numel(images.shape) / std::max<std::size_t>(n, 1);
  std::vector<int> out;
  out.reserve(n);
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t k = std::min(batch, n - start);
    Array chunk({k, images.shape[1], images.shape[2], images.shape[3]},
                std::vector<float>(images.data.begin() + start * m, images.data.begin() + (start + k) * m));
    const Array logits = predict_logits(model, chunk);
    const std::size_t c = logits.shape[1];
    for (std::size_t r = 0; r < k; ++r) {
      const float* row = logits.data.data() + r * c;
      out.push_back(static_cast<int>(std::max_element(row, row + c) - row));
    }
  }
  return out;
}

double accuracy(const Model& model, const Dataset& data) {
  if (data.size() == 0) throw ConfigError("accuracy: empty dataset");
  const auto pred = classify(model, data.images);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == data.labels[i];
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

std::vector<HookSite> hook_sites(const Model& model, SiteKind kind) {
  std::vector<HookSite> out;
  for (std::size_t i = 0; i < model.spec().depth; ++i) out.push_back(HookSite{i, kind});
  return out;
}

std::vector<HookSite> hook_sites(const Model& model, std::string_view kind) {
  return hook_sites(model, parse_site_kind(kind));
}

}  // namespace cogo
