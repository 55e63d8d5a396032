#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cogo/dataset.hpp"
#include "cogo/rng.hpp"
#include "cogo/tensor.hpp"

namespace cogo {

enum class Variant { vit_tiny, deit_tiny, hybrid_tiny };

std::string to_string(Variant v);
/// Throws ConfigError listing the valid names.
Variant parse_variant(std::string_view name);

struct ModelSpec {
  Variant variant = Variant::vit_tiny;
  std::size_t image_size = 32;
  std::size_t patch_size = 4;
  std::size_t in_channels = 3;
  std::size_t embed_dim = 64;
  std::size_t heads = 4;
  std::size_t depth = 4;
  std::size_t mlp_hidden = 128;
  std::size_t num_classes = 10;
  float dropout_p = 0.1f;

  std::size_t head_dim() const { return embed_dim / heads; }
  void validate() const;
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Token positions: class token first, then the additional token (deit_tiny
/// only), then patch tokens.
struct TokenLayout {
  std::size_t num_patch_tokens = 0;
  std::size_t class_token_index = 0;
  std::optional<std::size_t> additional_token_index;

  std::size_t num_tokens() const { return num_patch_tokens + 1 + (additional_token_index ? 1 : 0); }
};

enum class SiteKind { qkv, proj, attn_dropout, mlp };

std::string to_string(SiteKind k);
SiteKind parse_site_kind(std::string_view name);

/// Gradient shapes seen at each site for a batch of B images with N tokens:
///   qkv (B,N,3D), proj (B,N,D), attn_dropout (B,H,N,N), mlp (B,N,D).
struct HookSite {
  std::size_t block_index = 0;
  SiteKind site = SiteKind::qkv;
  friend bool operator==(const HookSite&, const HookSite&) = default;
};

/// Linear layers (relative to a block) whose gradients a site governs.
std::vector<std::string> site_linear_layers(SiteKind kind);

/// Hooks keyed by model site rather than by graph node, so they survive the
/// per-forward graph rebuild. Each forward attaches them to the fresh nodes.
class SiteHooks {
 public:
  struct Handle {
    std::uint64_t id = 0;
  };

  Handle add(const HookSite& site, GradHook hook);
  void remove(const Handle& handle);
  /// Hooks of `site`, in registration order.
  std::vector<GradHook> hooks_for(const HookSite& site) const;
  /// Appends every hook of `other` after the existing ones, with fresh handles.
  void append(const SiteHooks& other);
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    std::uint64_t id;
    HookSite site;
    GradHook hook;
  };
  std::vector<Entry> entries_;
  std::uint64_t next_id_ = 1;
};

struct Parameter {
  std::string name;
  Array value;
};

class Model {
 public:
  Model() = default;
  Model(ModelSpec spec, std::vector<Parameter> params);

  const ModelSpec& spec() const { return spec_; }
  TokenLayout layout() const;
  const std::vector<Parameter>& params() const { return params_; }
  std::vector<Parameter>& mutable_params() { return params_; }
  std::size_t index_of(const std::string& name) const;
  const Parameter& param(const std::string& name) const { return params_[index_of(name)]; }
  std::size_t num_weights() const;

 private:
  ModelSpec spec_;
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

/// Parameter names and shapes a spec requires, in canonical order.
std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelSpec& spec);

Model build(const ModelSpec& spec, Rng& rng);

struct ForwardOptions {
  bool train = false;            ///< enables dropout
  Rng* dropout_rng = nullptr;    ///< required when train && dropout_p > 0
  const SiteHooks* hooks = nullptr;
  bool param_grads = false;      ///< parameters become requires_grad leaves
  bool input_grad = false;       ///< the image batch becomes a requires_grad leaf
};

struct ForwardPass {
  Tensor input;
  Tensor logits;
  std::vector<Tensor> params;  ///< parallel to Model::params()
  std::vector<Tensor> attention;  ///< per block, (B,H,N,N) softmax output
  std::map<std::pair<std::size_t, SiteKind>, Tensor> sites;
};

/// images: (B,C,H,W). Values outside [0,1] are accepted.
ForwardPass forward(const Model& model, Tape& tape, const Array& images, const ForwardOptions& options = {});

/// Eval-mode logits (B, num_classes) without building gradients.
Array predict_logits(const Model& model, const Array& images);
/// Argmax predictions, evaluated in chunks of `batch` images.
std::vector<int> classify(const Model& model, const Array& images, std::size_t batch = 64);
double accuracy(const Model& model, const Dataset& data);

/// One handle per block for the given site kind, ordered by block index.
std::vector<HookSite> hook_sites(const Model& model, SiteKind kind);
std::vector<HookSite> hook_sites(const Model& model, std::string_view kind);

// --------------------------------------------------------------------------
// Training and checkpoints

struct TrainConfig {
  std::size_t epochs = 30;
  float lr = 2e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float adam_eps = 1e-8f;
  float weight_decay = 0.05f;
  std::size_t batch_size = 32;
  std::size_t warmup_epochs = 1;
  bool augment = true;  // random flips and quarter turns
  float max_gain = 3.0f;  // random brightness gain in [1/max_gain, max_gain]; 1 disables
  std::uint64_t seed = 0;
};

struct TrainingMeta {
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  float lr = 0.0f;
  float beta1 = 0.0f;
  float beta2 = 0.0f;
  float weight_decay = 0.0f;
  std::size_t batch_size = 0;
  std::size_t warmup_epochs = 0;
  double final_accuracy = 0.0;
  std::vector<double> epoch_losses;
  friend bool operator==(const TrainingMeta&, const TrainingMeta&) = default;
};

struct Checkpoint {
  ModelSpec spec;
  std::vector<Parameter> tensors;
  TrainingMeta meta;
};

Checkpoint make_checkpoint(const Model& model, TrainingMeta meta);
Model model_from_checkpoint(const Checkpoint& ckpt);

using EpochCallback = std::function<void(std::size_t epoch, double loss, double val_accuracy)>;

/// AdamW with linear warmup then cosine decay over plain cross-entropy. Throws NumericError naming the epoch if the loss diverges.
Checkpoint train(Model& model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& config,
                 const EpochCallback& on_epoch = {});

inline constexpr std::uint16_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// As above, but fails with a message naming the first mismatched spec field.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelSpec& expected);

}  // namespace cogo
