#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cogo/analysis.hpp"
#include "cogo/attack.hpp"
#include "cogo/model.hpp"

namespace cogo {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kOutputRootEnv = "COGO_OUTPUT_ROOT";

/// $COGO_OUTPUT_ROOT, or ./cogo_runs when unset.
std::filesystem::path default_output_root();

enum class AttackMethod { cogo, mim };
std::string to_string(AttackMethod m);
AttackMethod parse_attack_method(const std::string& name);

/// Sweep axes understood by cmd_ablate.
const std::vector<std::string>& sweep_axes();

/// Returns `base` with one sweep value applied. Values per axis:
///   gamma, lambda: number; n_pairs, N_iterations: integer;
///   thresholds: "tau_mi:tau_corr" (switches to fixed thresholds);
///   c: "adaptive" or a number (fixed token scale);
///   hook_site: site names joined by '+', e.g. "qkv+proj";
///   ce_is_toggle: none | ce | is | ce+is.
/// Throws ConfigError for unknown axes or malformed values.
AttackConfig apply_sweep_value(const AttackConfig& base, const std::string& axis, const std::string& value);

/// Turns enhancement off; one sample per iteration then suffices.
AttackConfig without_ce(AttackConfig cfg);

struct ExperimentConfig {
  std::string dataset = "procedural:0:20:eval";
  std::size_t max_images = 0;  ///< 0 keeps every image
  std::vector<std::string> surrogates;  ///< checkpoint paths
  std::vector<std::string> targets;     ///< checkpoint paths
  AttackMethod method = AttackMethod::cogo;
  AttackConfig attack;
  std::optional<std::string> sweep_axis;
  std::vector<std::string> sweep_values;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::filesystem::path output_dir;
  std::size_t threads = 0;
  bool save_images = false;

  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// A checkpoint loaded for evaluation, identified by its file stem.
struct LoadedModel {
  std::string id;
  Model model;
};
LoadedModel load_model(const std::filesystem::path& checkpoint);

AttackFactory make_attack_factory(AttackMethod method, const AttackConfig& cfg);

// ---------------------------------------------------------------------------
// Commands

/// Writes images/ and labels.csv for one split. n_per_class must be >= 10.
std::size_t cmd_gen_data(std::uint64_t seed, std::size_t n_per_class, Split split, const std::filesystem::path& out_dir);

struct TrainRequest {
  Variant variant = Variant::vit_tiny;
  std::string train_data = "procedural:0:200:train";
  std::string val_data = "procedural:0:50:val";
  TrainConfig config;
  std::filesystem::path out_checkpoint;
};

/// Trains, writes the checkpoint and a per-epoch log (<checkpoint>.log.csv).
Checkpoint cmd_train(const TrainRequest& request);

/// Transfer evaluation for every surrogate and seed. Writes transfer.csv,
/// transfer.json and config.json into cfg.output_dir, plus adversarial PNGs
/// for the first seed when cfg.save_images is set.
std::vector<TransferReport> cmd_attack(const ExperimentConfig& cfg);

struct AblationRun {
  std::string value;
  std::uint64_t seed = 0;
  std::string surrogate;
  double transfer_asr = 0.0;  ///< mean over targets other than the surrogate
  double whitebox_asr = 0.0;  ///< surrogate attacked by its own examples, or NaN
};

struct AblationPoint {
  std::string value;
  double mean = 0.0;  ///< over seeds, of the per-seed mean over surrogates
  double std = 0.0;   ///< sample standard deviation over seeds
  std::vector<double> per_seed;
};

struct AblationReport {
  std::string axis;
  std::vector<AblationRun> runs;
  std::vector<AblationPoint> points;
};

/// One transfer evaluation per sweep value, seed and surrogate. Writes
/// ablation.csv (value,mean,std,n_seeds), ablation_runs.csv and
/// ablation.json into cfg.output_dir.
AblationReport cmd_ablate(const ExperimentConfig& cfg);

enum class AnalyzeMode { dispersion, sensitivity };
AnalyzeMode parse_analyze_mode(const std::string& name);

struct AnalyzeRequest {
  std::filesystem::path checkpoint;
  std::string dataset = "procedural:0:10:eval";
  std::size_t max_images = 0;
  AnalyzeMode mode = AnalyzeMode::dispersion;
  AttackConfig attack;
  std::filesystem::path output_dir;
  std::size_t threads = 0;
};

/// dispersion: writes dispersion.csv (block,pre,post);
/// sensitivity: writes sensitivity_NNNNN.png per image.
/// Returns the paths written.
std::vector<std::filesystem::path> cmd_analyze(const AnalyzeRequest& request);

// ---------------------------------------------------------------------------
// Report files

void write_transfer_csv(const std::filesystem::path& path, const std::vector<TransferReport>& reports);
void write_transfer_json(const std::filesystem::path& path, const std::vector<TransferReport>& reports,
                         const nlohmann::json& config);
/// Throws ConfigError when the schema version or a required field differs.
std::vector<TransferReport> read_transfer_json(const std::filesystem::path& path);

}  // namespace cogo
