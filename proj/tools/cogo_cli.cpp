// cogo: command-line entry point for the transferability lab.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

#include "cogo/error.hpp"
#include "cogo/harness.hpp"
#include "cogo/log.hpp"
#include "cogo/parallel.hpp"

namespace {

using namespace cogo;

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(std::stoull(item));
  if (out.empty()) throw ConfigError("--seeds: no seeds given");
  return out;
}

std::vector<std::string> parse_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// Attack flags shared by attack, ablate and analyze. Unset flags keep the
// value from --config (or the built-in default).
struct AttackFlags {
  std::optional<float> epsilon, gamma, noise_std, rho, alpha, beta_mi, beta_corr, lambda, mu;
  std::optional<std::size_t> iterations, samples, n_pairs;
  std::optional<std::string> c_mode, thresholds, sites;
  bool no_ce = false, no_is = false;

  void add(CLI::App* app) {
    app->add_option("--epsilon", epsilon, "L-inf budget in [0,1] pixel units (default 8/255)");
    app->add_option("--iterations,-T", iterations, "attack iterations (default 10)");
    app->add_option("--gamma", gamma, "spectral enhancement strength (default 1)");
    app->add_option("--noise-std", noise_std, "enhancement noise std (default 8/255)");
    app->add_option("--rho", rho, "spectral mask half-width (default 0.5)");
    app->add_option("--samples,-S", samples, "spectral samples per iteration (default 5)");
    app->add_option("--alpha", alpha, "suppression strength per flag (default 0.3)");
    app->add_option("--beta-mi", beta_mi, "MI threshold multiplier (default 1)");
    app->add_option("--beta-corr", beta_corr, "correlation threshold multiplier (default 1)");
    app->add_option("--n-pairs", n_pairs, "channel pairs sampled per hook call (default 5)");
    app->add_option("--thresholds", thresholds, "fixed thresholds 'tau_mi:tau_corr' instead of adaptive");
    app->add_option("--c-mode", c_mode, "additional-token scale: 'adaptive' or a fixed value");
    app->add_option("--hook-site", sites, "suppression sites joined by '+' (default qkv)");
    app->add_option("--lambda", lambda, "step size constant; step = lambda*eps/T (default 1.5)");
    app->add_option("--mu", mu, "momentum decay (default 1)");
    app->add_flag("--no-ce", no_ce, "disable commonality enhancement");
    app->add_flag("--no-is", no_is, "disable individuality suppression");
  }

  void apply(AttackConfig& c) const {
    if (epsilon) c.epsilon = *epsilon;
    if (iterations) c.iterations = *iterations;
    if (gamma) c.ce.gamma = *gamma;
    if (noise_std) c.ce.noise_std = *noise_std;
    if (rho) c.ce.rho = *rho;
    if (samples) c.spectral_samples = *samples;
    if (lambda) c.lambda_step = *lambda;
    if (mu) c.momentum_mu = *mu;
    if (c.is) {
      if (alpha) c.is->alpha = *alpha;
      if (beta_mi) c.is->beta_mi = *beta_mi;
      if (beta_corr) c.is->beta_corr = *beta_corr;
      if (n_pairs) c.is->n_pairs = *n_pairs;
      if (thresholds) c = apply_sweep_value(c, "thresholds", *thresholds);
      if (c_mode) c = apply_sweep_value(c, "c", *c_mode);
      if (sites) c = apply_sweep_value(c, "hook_site", *sites);
    }
    if (no_ce) c = without_ce(c);
    if (no_is) c.is.reset();
    c.validate();
  }
};

struct ExperimentFlags {
  std::string config;
  std::optional<std::string> dataset, seeds, method, out, surrogates, targets;
  std::optional<std::size_t> images, threads;
  bool save_images = false;
  AttackFlags attack;

  void add(CLI::App* app) {
    app->add_option("--config", config, "experiment JSON (a previous config.json snapshot works)");
    app->add_option("--surrogate", surrogates, "surrogate checkpoints, comma separated");
    app->add_option("--target", targets, "target checkpoints, comma separated (default: the surrogates)");
    app->add_option("--dataset", dataset, "procedural:SEED:N_PER_CLASS:SPLIT or an image directory");
    app->add_option("--images", images, "use only the first N images");
    app->add_option("--seeds", seeds, "comma-separated attack seeds (default 0,1,2)");
    app->add_option("--method", method, "cogo or mim");
    app->add_option("--out", out, "output directory");
    app->add_option("--threads", threads, "worker threads (default: all cores)");
    app->add_flag("--save-images", save_images, "write adversarial PNGs for the first seed");
    attack.add(app);
  }

  ExperimentConfig build() const {
    ExperimentConfig c = config.empty() ? ExperimentConfig{} : load_experiment_config(config);
    if (dataset) c.dataset = *dataset;
    if (images) c.max_images = *images;
    if (surrogates) c.surrogates = parse_list(*surrogates);
    if (targets) c.targets = parse_list(*targets);
    if (seeds) c.seeds = parse_seeds(*seeds);
    if (method) c.method = parse_attack_method(*method);
    if (out) c.output_dir = *out;
    if (threads) c.threads = *threads;
    if (save_images) c.save_images = true;
    attack.apply(c.attack);
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"COGO adversarial transferability lab"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("--quiet,-q", quiet, "only print warnings and errors");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "render the procedural shape/texture dataset");
  std::uint64_t gen_seed = 0;
  std::size_t gen_n = 100;
  std::string gen_split = "train";
  std::string gen_out;
  gen->add_option("--seed", gen_seed, "dataset seed");
  gen->add_option("--n-per-class", gen_n, "images per class (>= 10)");
  gen->add_option("--split", gen_split, "train, val or eval");
  gen->add_option("--out", gen_out, "output directory (default $COGO_OUTPUT_ROOT/data/SPLIT)");

  // train
  auto* tr = app.add_subcommand("train", "train a tiny ViT variant");
  TrainRequest treq;
  std::string variant = "vit_tiny";
  std::string train_out;
  tr->add_option("--variant", variant, "vit_tiny, deit_tiny or hybrid_tiny");
  tr->add_option("--dataset", treq.train_data, "training data reference");
  tr->add_option("--val", treq.val_data, "validation data reference ('' to skip)");
  tr->add_option("--epochs", treq.config.epochs, "epochs");
  tr->add_option("--seed", treq.config.seed, "initialization and shuffling seed");
  tr->add_option("--lr", treq.config.lr, "peak learning rate");
  tr->add_option("--batch", treq.config.batch_size, "batch size");
  tr->add_option("--weight-decay", treq.config.weight_decay, "weight decay on matrices");
  tr->add_option("--max-gain", treq.config.max_gain, "brightness augmentation range [1/g, g] (1 disables)");
  tr->add_option("--out", train_out, "checkpoint path (default $COGO_OUTPUT_ROOT/models/VARIANT.ckpt)");

  // attack / ablate
  auto* at = app.add_subcommand("attack", "craft adversarial examples and report transfer ASR");
  ExperimentFlags aflags;
  aflags.add(at);
  auto* ab = app.add_subcommand("ablate", "sweep one attack setting and report mean +- std transfer ASR");
  ExperimentFlags bflags;
  std::string axis, values;
  bflags.add(ab);
  ab->add_option("--axis", axis, "gamma, n_pairs, thresholds, c, lambda, hook_site, N_iterations, ce_is_toggle")
      ->required();
  ab->add_option("--values", values, "comma-separated sweep values")->required();

  // analyze
  auto* an = app.add_subcommand("analyze", "gradient dispersion profile or sensitivity maps");
  AnalyzeRequest areq;
  std::string mode = "dispersion";
  std::string ana_out, ana_ckpt;
  AttackFlags anflags;
  an->add_option("--checkpoint", ana_ckpt, "model checkpoint")->required();
  an->add_option("--dataset", areq.dataset, "data reference");
  an->add_option("--images", areq.max_images, "use only the first N images");
  an->add_option("--mode", mode, "dispersion or sensitivity");
  an->add_option("--out", ana_out, "output directory");
  an->add_option("--threads", areq.threads, "worker threads");
  an->add_option("--seed", areq.attack.seed, "attack seed");
  anflags.add(an);

  CLI11_PARSE(app, argc, argv);
  if (quiet) set_log_level(LogLevel::warn);

  try {
    if (*gen) {
      const Split split = parse_split(gen_split);
      const std::filesystem::path out = gen_out.empty() ? default_output_root() / "data" / gen_split : std::filesystem::path(gen_out);
      const std::size_t n = cmd_gen_data(gen_seed, gen_n, split, out);
      std::cout << "wrote " << n << " images to " << out.string() << "\n";
    } else if (*tr) {
      treq.variant = parse_variant(variant);
      treq.out_checkpoint =
          train_out.empty() ? default_output_root() / "models" / (variant + ".ckpt") : std::filesystem::path(train_out);
      const Checkpoint ckpt = cmd_train(treq);
      std::cout << "wrote " << treq.out_checkpoint.string() << " (val accuracy " << ckpt.meta.final_accuracy << ")\n";
    } else if (*at) {
      const ExperimentConfig cfg = aflags.build();
      const auto reports = cmd_attack(cfg);
      std::cout << "surrogate,target,seed,asr\n";
      for (const auto& r : reports)
        for (const auto& row : r.rows) std::cout << r.surrogate << ',' << row.target << ',' << r.seed << ',' << row.asr << "\n";
    } else if (*ab) {
      ExperimentConfig cfg = bflags.build();
      cfg.sweep_axis = axis;
      cfg.sweep_values = parse_list(values);
      const auto report = cmd_ablate(cfg);
      std::cout << "value,mean_asr,std_asr\n";
      for (const auto& p : report.points) std::cout << p.value << ',' << p.mean << ',' << p.std << "\n";
    } else if (*an) {
      areq.checkpoint = ana_ckpt;
      areq.mode = parse_analyze_mode(mode);
      areq.output_dir = ana_out;
      anflags.apply(areq.attack);
      for (const auto& p : cmd_analyze(areq)) std::cout << p.string() << "\n";
    }
  } catch (const cogo::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
