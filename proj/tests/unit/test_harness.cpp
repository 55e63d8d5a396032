#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cogo/error.hpp"
#include "cogo/harness.hpp"
#include "cogo/serialization.hpp"

using namespace cogo;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "cogo_harness_test" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

// Untrained checkpoints are enough to exercise the plumbing.
std::vector<std::string> write_models(const fs::path& dir) {
  std::vector<std::string> out;
  for (Variant v : {Variant::vit_tiny, Variant::deit_tiny}) {
    ModelSpec s;
    s.variant = v;
    Rng rng(static_cast<std::uint64_t>(v) + 1);
    const fs::path p = dir / (to_string(v) + ".ckpt");
    save_checkpoint(p, make_checkpoint(build(s, rng), {}));
    out.push_back(p.string());
  }
  return out;
}

ExperimentConfig small_experiment(const fs::path& dir) {
  ExperimentConfig c;
  c.dataset = "procedural:3:1:eval";
  c.surrogates = write_models(dir);
  c.seeds = {0, 1};
  c.attack.iterations = 2;
  c.attack.spectral_samples = 2;
  c.output_dir = dir / "out";
  c.threads = 1;
  return c;
}

}  // namespace

TEST(Sweep, ParsesEveryAxis) {
  const AttackConfig base;
  EXPECT_EQ(apply_sweep_value(base, "gamma", "0.5").ce.gamma, 0.5f);
  EXPECT_EQ(apply_sweep_value(base, "lambda", "2").lambda_step, 2.0f);
  EXPECT_EQ(apply_sweep_value(base, "n_pairs", "9").is->n_pairs, 9u);
  EXPECT_EQ(apply_sweep_value(base, "N_iterations", "20").iterations, 20u);
  const AttackConfig th = apply_sweep_value(base, "thresholds", "0.3:0.6");
  EXPECT_EQ(th.is->threshold_mode, ThresholdMode::fixed);
  EXPECT_EQ(th.is->tau_mi, 0.3f);
  EXPECT_EQ(th.is->tau_corr, 0.6f);
  const AttackConfig c = apply_sweep_value(base, "c", "0.2");
  EXPECT_EQ(c.is->token_scale_mode, TokenScaleMode::fixed);
  EXPECT_EQ(c.is->token_scale, 0.2f);
  EXPECT_EQ(apply_sweep_value(c, "c", "adaptive").is->token_scale_mode, TokenScaleMode::adaptive_sigmoid);
  EXPECT_EQ(apply_sweep_value(base, "hook_site", "qkv+mlp").is_sites, (std::vector<SiteKind>{SiteKind::qkv, SiteKind::mlp}));
}

TEST(Sweep, ToggleCorners) {
  const AttackConfig base;
  const AttackConfig none = apply_sweep_value(base, "ce_is_toggle", "none");
  EXPECT_FALSE(none.is);
  EXPECT_TRUE(none.ce.is_identity());
  EXPECT_EQ(none.spectral_samples, 1u);
  const AttackConfig ce = apply_sweep_value(base, "ce_is_toggle", "ce");
  EXPECT_FALSE(ce.is);
  EXPECT_FALSE(ce.ce.is_identity());
  const AttackConfig is = apply_sweep_value(base, "ce_is_toggle", "is");
  EXPECT_TRUE(is.is);
  EXPECT_TRUE(is.ce.is_identity());
  const AttackConfig both = apply_sweep_value(base, "ce_is_toggle", "ce+is");
  EXPECT_TRUE(both.is);
  EXPECT_EQ(both.spectral_samples, base.spectral_samples);
}

TEST(Sweep, RejectsUnknownAxesAndBadValues) {
  const AttackConfig base;
  try {
    apply_sweep_value(base, "beta", "1");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("ce_is_toggle"), std::string::npos) << e.what();
  }
  EXPECT_THROW(apply_sweep_value(base, "gamma", "abc"), ConfigError);
  EXPECT_THROW(apply_sweep_value(base, "n_pairs", "0"), ConfigError);
  EXPECT_THROW(apply_sweep_value(base, "thresholds", "0.3"), ConfigError);
  EXPECT_THROW(apply_sweep_value(base, "hook_site", "qkv+softmax"), ConfigError);
  EXPECT_THROW(apply_sweep_value(base, "ce_is_toggle", "both"), ConfigError);
  AttackConfig no_is = base;
  no_is.is.reset();
  EXPECT_THROW(apply_sweep_value(no_is, "n_pairs", "3"), ConfigError);
}

TEST(Sweep, DefaultsMatchPublishedSettings) {
  const AttackConfig c;
  EXPECT_EQ(c.iterations, 10u);
  EXPECT_FLOAT_EQ(c.epsilon, 8.0f / 255.0f);
  EXPECT_EQ(c.ce.gamma, 1.0f);
  EXPECT_EQ(c.lambda_step, 1.5f);
  EXPECT_FLOAT_EQ(c.step_size(), 1.5f * (8.0f / 255.0f) / 10.0f);
}

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c;
  c.surrogates = {"a.ckpt"};
  c.targets = {"b.ckpt", "c.ckpt"};
  c.method = AttackMethod::mim;
  c.attack = apply_sweep_value(c.attack, "thresholds", "0.1:0.2");
  c.attack.is_sites = {SiteKind::proj};
  c.sweep_axis = "gamma";
  c.sweep_values = {"0", "1"};
  c.seeds = {4, 5};
  c.output_dir = "somewhere";
  const nlohmann::json j = c;
  const ExperimentConfig back = j.get<ExperimentConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_EQ(back.attack.is->tau_corr, 0.2f);

  AttackConfig no_is;
  no_is.is.reset();
  EXPECT_FALSE(nlohmann::json(no_is).get<AttackConfig>().is);
}

TEST(Config, SnapshotLoadsBack) {
  const fs::path dir = scratch("snapshot");
  ExperimentConfig c;
  c.surrogates = {"x.ckpt"};
  c.attack.ce.gamma = 0.25f;
  {
    std::ofstream out(dir / "config.json");
    out << nlohmann::json{{"config", c}}.dump();
  }
  EXPECT_EQ(load_experiment_config(dir / "config.json").attack.ce.gamma, 0.25f);
  {
    std::ofstream out(dir / "bad.json");
    out << "{ not json";
  }
  EXPECT_THROW(load_experiment_config(dir / "bad.json"), ConfigError);
  EXPECT_THROW(load_experiment_config(dir / "missing.json"), IoError);
}

TEST(Config, ValidationCatchesEmptyLists) {
  ExperimentConfig c;
  EXPECT_THROW(c.validate(), ConfigError);
  c.surrogates = {"a"};
  c.seeds.clear();
  EXPECT_THROW(c.validate(), ConfigError);
  c.seeds = {0};
  c.sweep_axis = "gamma";
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(OutputRoot, FollowsEnvironment) {
  ::setenv(kOutputRootEnv, "/tmp/elsewhere", 1);
  EXPECT_EQ(default_output_root(), fs::path("/tmp/elsewhere"));
  ::unsetenv(kOutputRootEnv);
  EXPECT_EQ(default_output_root(), fs::path("cogo_runs"));
}

TEST(GenData, DeterministicBalancedAndLossless) {
  const fs::path a = scratch("gen_a"), b = scratch("gen_b");
  EXPECT_EQ(cmd_gen_data(7, 10, Split::val, a), 100u);
  cmd_gen_data(7, 10, Split::val, b);
  EXPECT_EQ(line_count(a / "labels.csv"), 101u);
  EXPECT_EQ(slurp(a / "labels.csv"), slurp(b / "labels.csv"));
  for (int i : {0, 37, 99}) {
    char name[32];
    std::snprintf(name, sizeof name, "images/%05d.png", i);
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
  const Dataset loaded = load_image_dir(a);
  const Dataset direct = generate_procedural(7, 10, Split::val);
  EXPECT_EQ(loaded.labels, direct.labels);
  EXPECT_EQ(loaded.images, direct.images);
  std::vector<int> per_class(10, 0);
  for (int l : loaded.labels) ++per_class[l];
  for (int n : per_class) EXPECT_EQ(n, 10);
  EXPECT_THROW(cmd_gen_data(7, 9, Split::val, a), ConfigError);
}

TEST(GenData, SplitsDiffer) {
  EXPECT_NE(generate_procedural(0, 1, Split::train).images, generate_procedural(0, 1, Split::eval).images);
  EXPECT_EQ(load_dataset("procedural:0:1:eval").images, generate_procedural(0, 1, Split::eval).images);
  EXPECT_THROW(load_dataset("procedural:0:x:eval"), ConfigError);
  EXPECT_THROW(load_dataset("procedural:0:1:test"), ConfigError);
}

TEST(Train, CommandWritesReproducibleCheckpointAndLog) {
  const fs::path dir = scratch("train");
  TrainRequest r;
  r.train_data = "procedural:0:2:train";
  r.val_data = "procedural:0:1:val";
  r.config.epochs = 2;
  r.out_checkpoint = dir / "a.ckpt";
  const Checkpoint ck = cmd_train(r);
  r.out_checkpoint = dir / "b.ckpt";
  cmd_train(r);
  EXPECT_EQ(slurp(dir / "a.ckpt"), slurp(dir / "b.ckpt"));
  EXPECT_EQ(line_count(dir / "a.ckpt.log.csv"), 3u);
  EXPECT_EQ(load_checkpoint(dir / "a.ckpt").meta, ck.meta);
}

TEST(CmdAttack, ZeroBudgetReportsCleanErrorAndFilesRoundTrip) {
  const fs::path dir = scratch("attack_eps0");
  ExperimentConfig c = small_experiment(dir);
  c.attack.epsilon = 0.0f;
  c.save_images = true;
  const auto reports = cmd_attack(c);
  ASSERT_EQ(reports.size(), 4u);  // 2 surrogates x 2 seeds
  const Dataset data = load_dataset(c.dataset);
  for (const auto& r : reports)
    for (const auto& row : r.rows) {
      const LoadedModel m = load_model(c.surrogates[row.target == "vit_tiny" ? 0 : 1]);
      EXPECT_DOUBLE_EQ(row.asr, attack_success_rate(classify(m.model, data.images), data.labels));
    }
  EXPECT_EQ(line_count(c.output_dir / "transfer.csv"), 1u + 4u * 2u);
  EXPECT_TRUE(fs::exists(c.output_dir / "config.json"));
  EXPECT_TRUE(fs::exists(c.output_dir / "adv_vit_tiny" / "00009.png"));

  const auto back = read_transfer_json(c.output_dir / "transfer.json");
  ASSERT_EQ(back.size(), reports.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].surrogate, reports[i].surrogate);
    EXPECT_EQ(back[i].seed, reports[i].seed);
    EXPECT_EQ(back[i].rows.size(), reports[i].rows.size());
    EXPECT_DOUBLE_EQ(back[i].rows[1].asr, reports[i].rows[1].asr);
  }
  EXPECT_EQ(load_experiment_config(c.output_dir / "config.json").attack.epsilon, 0.0f);
}

TEST(CmdAttack, ReportSchemaIsChecked) {
  const fs::path dir = scratch("schema");
  auto write = [&](const nlohmann::json& j) {
    std::ofstream out(dir / "t.json");
    out << j.dump();
  };
  write({{"schema_version", kReportSchemaVersion + 1}, {"kind", "transfer"}, {"reports", nlohmann::json::array()}});
  EXPECT_THROW(read_transfer_json(dir / "t.json"), ConfigError);
  write({{"schema_version", kReportSchemaVersion}, {"kind", "ablation"}});
  EXPECT_THROW(read_transfer_json(dir / "t.json"), ConfigError);
  write({{"schema_version", kReportSchemaVersion}, {"kind", "transfer"}, {"config", nlohmann::json::object()},
         {"reports", nlohmann::json::array({nlohmann::json{{"surrogate", "a"}}})}});
  EXPECT_THROW(read_transfer_json(dir / "t.json"), ConfigError);
}

TEST(CmdAttack, DisablingBothModulesReproducesMim) {
  const fs::path dir = scratch("attack_mim");
  ExperimentConfig c = small_experiment(dir);
  c.attack = apply_sweep_value(c.attack, "ce_is_toggle", "none");
  c.output_dir = dir / "cogo";
  const auto cogo = cmd_attack(c);
  c.method = AttackMethod::mim;
  c.output_dir = dir / "mim";
  const auto mim = cmd_attack(c);
  ASSERT_EQ(cogo.size(), mim.size());
  for (std::size_t i = 0; i < cogo.size(); ++i)
    for (std::size_t t = 0; t < cogo[i].rows.size(); ++t) EXPECT_EQ(cogo[i].rows[t].asr, mim[i].rows[t].asr);
}

TEST(Ablate, WritesOnePointPerValue) {
  const fs::path dir = scratch("ablate");
  ExperimentConfig c = small_experiment(dir);
  c.sweep_axis = "gamma";
  c.sweep_values = {"0", "1"};
  const AblationReport r = cmd_ablate(c);
  ASSERT_EQ(r.points.size(), 2u);
  EXPECT_EQ(r.runs.size(), 2u * 2u * 2u);
  for (const auto& p : r.points) {
    EXPECT_EQ(p.per_seed.size(), 2u);
    EXPECT_GE(p.std, 0.0);
  }
  EXPECT_EQ(line_count(c.output_dir / "ablation.csv"), 3u);
  EXPECT_EQ(line_count(c.output_dir / "ablation_runs.csv"), 9u);
  EXPECT_TRUE(fs::exists(c.output_dir / "ablation.json"));
  c.sweep_axis = "nope";
  EXPECT_THROW(cmd_ablate(c), ConfigError);
}

TEST(Analyze, DispersionAndSensitivityOutputs) {
  const fs::path dir = scratch("analyze");
  AnalyzeRequest r;
  r.checkpoint = write_models(dir)[1];
  r.dataset = "procedural:0:1:eval";
  r.max_images = 2;
  r.attack.iterations = 2;
  r.attack.spectral_samples = 1;
  r.output_dir = dir / "out";
  r.threads = 1;
  const auto d = cmd_analyze(r);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(line_count(d[0]), 5u);
  r.mode = AnalyzeMode::sensitivity;
  const auto s = cmd_analyze(r);
  EXPECT_EQ(s.size(), 2u);
  for (const auto& p : s) EXPECT_TRUE(fs::exists(p));
  EXPECT_THROW(parse_analyze_mode("heat"), ConfigError);
}
