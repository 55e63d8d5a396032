#include "cogo/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "cogo/error.hpp"
#include "cogo/image_io.hpp"
#include "cogo/log.hpp"
#include "cogo/serialization.hpp"

namespace cogo {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

float parse_float(const std::string& axis, const std::string& v) {
  try {
    std::size_t used = 0;
    const float f = std::stof(v, &used);
    if (used != v.size() || !std::isfinite(f)) throw std::invalid_argument(v);
    return f;
  } catch (const std::exception&) {
    throw ConfigError("sweep axis '" + axis + "': '" + v + "' is not a number");
  }
}

std::size_t parse_count(const std::string& axis, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long n = std::stoll(v, &used);
    if (used != v.size() || n < 1) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw ConfigError("sweep axis '" + axis + "': '" + v + "' is not a positive integer");
  }
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw IoError("cannot create output directory " + dir.string() + (ec ? ": " + ec.message() : ""));
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(9);
  return out;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

Dataset load_subset(const std::string& ref, std::size_t max_images) {
  Dataset d = load_dataset(ref);
  return max_images ? d.head(max_images) : d;
}

std::vector<LoadedModel> load_models(const std::vector<std::string>& paths) {
  std::vector<LoadedModel> out;
  for (const auto& p : paths) out.push_back(load_model(p));
  return out;
}

std::vector<NamedModel> named(const std::vector<LoadedModel>& models) {
  std::vector<NamedModel> out;
  for (const auto& m : models) out.push_back({m.id, &m.model});
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

std::filesystem::path default_output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return env && *env ? std::filesystem::path(env) : std::filesystem::path("cogo_runs");
}

std::string to_string(AttackMethod m) { return m == AttackMethod::cogo ? "cogo" : "mim"; }

AttackMethod parse_attack_method(const std::string& name) {
  if (name == "cogo") return AttackMethod::cogo;
  if (name == "mim") return AttackMethod::mim;
  throw ConfigError("unknown attack method '" + name + "' (valid: cogo, mim)");
}

const std::vector<std::string>& sweep_axes() {
  static const std::vector<std::string> axes = {"gamma",     "n_pairs",      "thresholds",  "c",
                                                "lambda",    "hook_site",    "N_iterations", "ce_is_toggle"};
  return axes;
}

AttackConfig without_ce(AttackConfig cfg) {
  cfg.ce = CeConfig{0.0f, 0.0f, 0.0f};
  cfg.spectral_samples = 1;
  return cfg;
}

AttackConfig apply_sweep_value(const AttackConfig& base, const std::string& axis, const std::string& value) {
  AttackConfig c = base;
  auto need_is = [&]() -> SuppressionConfig& {
    if (!c.is) throw ConfigError("sweep axis '" + axis + "' needs suppression enabled in the base config");
    return *c.is;
  };
  if (axis == "gamma") {
    c.ce.gamma = parse_float(axis, value);
  } else if (axis == "lambda") {
    c.lambda_step = parse_float(axis, value);
  } else if (axis == "n_pairs") {
    need_is().n_pairs = parse_count(axis, value);
  } else if (axis == "N_iterations") {
    c.iterations = parse_count(axis, value);
  } else if (axis == "thresholds") {
    const auto parts = split(value, ':');
    if (parts.size() != 2) throw ConfigError("sweep axis 'thresholds': expected 'tau_mi:tau_corr', got '" + value + "'");
    auto& is = need_is();
    is.threshold_mode = ThresholdMode::fixed;
    is.tau_mi = parse_float(axis, parts[0]);
    is.tau_corr = parse_float(axis, parts[1]);
  } else if (axis == "c") {
    auto& is = need_is();
    if (value == "adaptive") {
      is.token_scale_mode = TokenScaleMode::adaptive_sigmoid;
    } else {
      is.token_scale_mode = TokenScaleMode::fixed;
      is.token_scale = parse_float(axis, value);
    }
  } else if (axis == "hook_site") {
    need_is();
    c.is_sites.clear();
    for (const auto& s : split(value, '+')) c.is_sites.push_back(parse_site_kind(s));
  } else if (axis == "ce_is_toggle") {
    const bool ce = value == "ce" || value == "ce+is";
    const bool is = value == "is" || value == "ce+is";
    if (!ce && !is && value != "none")
      throw ConfigError("sweep axis 'ce_is_toggle': unknown value '" + value + "' (valid: none, ce, is, ce+is)");
    if (!ce) c = without_ce(c);
    if (!is) c.is.reset();
    if (is && !c.is) c.is = SuppressionConfig{};
  } else {
    std::string valid;
    for (const auto& a : sweep_axes()) valid += (valid.empty() ? "" : ", ") + a;
    throw ConfigError("unknown sweep axis '" + axis + "' (valid: " + valid + ")");
  }
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  attack.validate();
  if (surrogates.empty()) throw ConfigError("experiment: at least one surrogate checkpoint is required");
  if (seeds.empty()) throw ConfigError("experiment: seeds list is empty");
  if (sweep_axis && sweep_values.empty()) throw ConfigError("experiment: sweep axis set without values");
  if (sweep_axis)
    for (const auto& v : sweep_values) apply_sweep_value(attack, *sweep_axis, v);
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = {{"dataset", c.dataset},
       {"max_images", c.max_images},
       {"surrogates", c.surrogates},
       {"targets", c.targets},
       {"method", to_string(c.method)},
       {"attack", c.attack},
       {"sweep_axis", c.sweep_axis ? nlohmann::json(*c.sweep_axis) : nlohmann::json(nullptr)},
       {"sweep_values", c.sweep_values},
       {"seeds", c.seeds},
       {"output_dir", c.output_dir.string()},
       {"threads", c.threads},
       {"save_images", c.save_images}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c.dataset = j.value("dataset", c.dataset);
  c.max_images = j.value("max_images", c.max_images);
  c.surrogates = j.value("surrogates", c.surrogates);
  c.targets = j.value("targets", c.targets);
  if (j.contains("method")) c.method = parse_attack_method(j.at("method").get<std::string>());
  if (j.contains("attack")) c.attack = j.at("attack").get<AttackConfig>();
  if (j.contains("sweep_axis") && !j.at("sweep_axis").is_null()) c.sweep_axis = j.at("sweep_axis").get<std::string>();
  c.sweep_values = j.value("sweep_values", c.sweep_values);
  c.seeds = j.value("seeds", c.seeds);
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  c.threads = j.value("threads", c.threads);
  c.save_images = j.value("save_images", c.save_images);
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  try {
    auto j = nlohmann::json::parse(in);
    if (j.contains("config")) j = j.at("config");
    return j.get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid config " + path.string() + ": " + e.what());
  }
}

LoadedModel load_model(const std::filesystem::path& checkpoint) {
  return LoadedModel{checkpoint.stem().string(), model_from_checkpoint(load_checkpoint(checkpoint))};
}

AttackFactory make_attack_factory(AttackMethod method, const AttackConfig& cfg) {
  return [method, cfg](const Model& surrogate, std::uint64_t seed) -> AttackFn {
    AttackConfig c = cfg;
    c.seed = seed;
    const Model* m = &surrogate;
    if (method == AttackMethod::mim)
      return [m, c](const Array& x, int label, std::uint64_t) { return mim_attack(*m, x, label, c); };
    return [m, c](const Array& x, int label, std::uint64_t stream) { return cogo_attack(*m, x, label, c, stream); };
  };
}

// ---------------------------------------------------------------------------

std::size_t cmd_gen_data(std::uint64_t seed, std::size_t n_per_class, Split split, const std::filesystem::path& out_dir) {
  if (n_per_class < 10) throw ConfigError("gen-data: n_per_class must be at least 10, got " + std::to_string(n_per_class));
  ensure_dir(out_dir);
  const Dataset d = generate_procedural(seed, n_per_class, split);
  write_image_dir(d, out_dir);
  return d.size();
}

Checkpoint cmd_train(const TrainRequest& r) {
  if (r.out_checkpoint.empty()) throw ConfigError("train: output checkpoint path is required");
  if (r.out_checkpoint.has_parent_path()) ensure_dir(r.out_checkpoint.parent_path());
  const Dataset train_set = load_dataset(r.train_data);
  const Dataset val_set = r.val_data.empty() ? Dataset{} : load_dataset(r.val_data);

  ModelSpec spec;
  spec.variant = r.variant;
  Rng init_rng = Rng(r.config.seed).substream(0);
  Model model = build(spec, init_rng);

  std::filesystem::path log_path = r.out_checkpoint;
  log_path += ".log.csv";
  auto log_file = open_out(log_path);
  log_file << "epoch,loss,val_accuracy\n";
  const Checkpoint ckpt = train(model, train_set, val_set, r.config, [&](std::size_t epoch, double loss, double acc) {
    log_file << epoch << ',' << loss << ',' << acc << '\n';
    std::ostringstream msg;
    msg << to_string(r.variant) << " epoch " << epoch + 1 << "/" << r.config.epochs << " loss " << std::setprecision(4)
        << loss << " val_acc " << acc;
    log_info(msg.str());
  });
  save_checkpoint(r.out_checkpoint, ckpt);
  return ckpt;
}

std::vector<TransferReport> cmd_attack(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::filesystem::path out = cfg.output_dir.empty() ? default_output_root() / "attack" : cfg.output_dir;
  ensure_dir(out);
  const Dataset data = load_subset(cfg.dataset, cfg.max_images);
  const auto surrogates = load_models(cfg.surrogates);
  const auto targets = load_models(cfg.targets.empty() ? cfg.surrogates : cfg.targets);
  const auto s_named = named(surrogates);
  const auto t_named = named(targets);

  nlohmann::json snapshot = cfg;
  snapshot["output_dir"] = out.string();
  write_json(out / "config.json", snapshot);

  std::vector<TransferReport> reports;
  const AttackFactory factory = make_attack_factory(cfg.method, cfg.attack);
  for (const auto& s : s_named)
    for (std::size_t k = 0; k < cfg.seeds.size(); ++k) {
      const std::uint64_t seed = cfg.seeds[k];
      const Array x_adv = generate_adversarial(data, factory(*s.model, seed), cfg.threads);
      reports.push_back(evaluate_transfer(s.id, x_adv, data, t_named, seed, snapshot));
      if (cfg.save_images && k == 0) {
        const auto dir = out / ("adv_" + s.id);
        ensure_dir(dir);
        const std::size_t m = data.image_numel();
        const Shape shape(x_adv.shape.begin() + 1, x_adv.shape.end());
        for (std::size_t i = 0; i < data.size(); ++i) {
          char name[32];
          std::snprintf(name, sizeof name, "%05zu.png", i);
          write_png_rgb(dir / name, Array(shape, std::vector<float>(x_adv.data.begin() + i * m,
                                                                    x_adv.data.begin() + (i + 1) * m)));
        }
      }
    }
  write_transfer_csv(out / "transfer.csv", reports);
  write_transfer_json(out / "transfer.json", reports, snapshot);
  return reports;
}

AblationReport cmd_ablate(const ExperimentConfig& cfg) {
  cfg.validate();
  if (!cfg.sweep_axis) throw ConfigError("ablate: a sweep axis is required");
  const std::filesystem::path out = cfg.output_dir.empty() ? default_output_root() / "ablate" : cfg.output_dir;
  ensure_dir(out);
  const Dataset data = load_subset(cfg.dataset, cfg.max_images);
  const auto surrogates = load_models(cfg.surrogates);
  const auto targets = load_models(cfg.targets.empty() ? cfg.surrogates : cfg.targets);
  const auto s_named = named(surrogates);
  const auto t_named = named(targets);

  nlohmann::json snapshot = cfg;
  snapshot["output_dir"] = out.string();
  write_json(out / "config.json", snapshot);

  AblationReport report;
  report.axis = *cfg.sweep_axis;
  for (const auto& value : cfg.sweep_values) {
    const AttackConfig point_cfg = apply_sweep_value(cfg.attack, report.axis, value);
    const AttackFactory factory = make_attack_factory(cfg.method, point_cfg);
    AblationPoint point;
    point.value = value;
    for (std::uint64_t seed : cfg.seeds) {
      std::vector<double> per_surrogate;
      for (const auto& s : s_named) {
        const Array x_adv = generate_adversarial(data, factory(*s.model, seed), cfg.threads);
        const TransferReport tr = evaluate_transfer(s.id, x_adv, data, t_named, seed);
        AblationRun run{value, seed, s.id, 0.0, std::numeric_limits<double>::quiet_NaN()};
        std::vector<double> held_out;
        for (const auto& row : tr.rows) {
          if (row.target == s.id)
            run.whitebox_asr = row.asr;
          else
            held_out.push_back(row.asr);
        }
        run.transfer_asr = held_out.empty() ? run.whitebox_asr : mean_of(held_out);
        per_surrogate.push_back(run.transfer_asr);
        report.runs.push_back(run);
      }
      point.per_seed.push_back(mean_of(per_surrogate));
    }
    point.mean = mean_of(point.per_seed);
    point.std = sample_std(point.per_seed);
    std::ostringstream msg;
    msg << "ablate " << report.axis << "=" << value << ": " << std::fixed << std::setprecision(2) << point.mean << " +- "
        << point.std;
    log_info(msg.str());
    report.points.push_back(std::move(point));
  }

  {
    auto f = open_out(out / "ablation.csv");
    f << "axis,value,mean_asr,std_asr,n_seeds\n";
    for (const auto& p : report.points)
      f << report.axis << ',' << p.value << ',' << p.mean << ',' << p.std << ',' << p.per_seed.size() << '\n';
  }
  {
    auto f = open_out(out / "ablation_runs.csv");
    f << "axis,value,seed,surrogate,transfer_asr,whitebox_asr\n";
    for (const auto& r : report.runs)
      f << report.axis << ',' << r.value << ',' << r.seed << ',' << r.surrogate << ',' << r.transfer_asr << ','
        << r.whitebox_asr << '\n';
  }
  nlohmann::json j = {{"schema_version", kReportSchemaVersion}, {"kind", "ablation"}, {"axis", report.axis},
                      {"config", snapshot}};
  for (const auto& p : report.points)
    j["points"].push_back({{"value", p.value}, {"mean", p.mean}, {"std", p.std}, {"per_seed", p.per_seed}});
  write_json(out / "ablation.json", j);
  return report;
}

AnalyzeMode parse_analyze_mode(const std::string& name) {
  if (name == "dispersion") return AnalyzeMode::dispersion;
  if (name == "sensitivity") return AnalyzeMode::sensitivity;
  throw ConfigError("unknown analyze mode '" + name + "' (valid: dispersion, sensitivity)");
}

std::vector<std::filesystem::path> cmd_analyze(const AnalyzeRequest& r) {
  const std::filesystem::path out = r.output_dir.empty() ? default_output_root() / "analyze" : r.output_dir;
  ensure_dir(out);
  const LoadedModel lm = load_model(r.checkpoint);
  const Dataset data = load_subset(r.dataset, r.max_images);
  std::vector<std::filesystem::path> written;
  if (r.mode == AnalyzeMode::dispersion) {
    const DispersionProfile p = dispersion_profile(lm.model, data.images, data.labels, r.attack, r.threads);
    const auto path = out / "dispersion.csv";
    auto f = open_out(path);
    f << "block,pre,post\n";
    for (std::size_t b = 0; b < p.pre.size(); ++b) f << b << ',' << p.pre[b] << ',' << p.post[b] << '\n';
    written.push_back(path);
  } else {
    for (std::size_t i = 0; i < data.size(); ++i) {
      char name[40];
      std::snprintf(name, sizeof name, "sensitivity_%05zu.png", i);
      write_png_gray(out / name, sensitivity_map(lm.model, data.image(i), data.labels[i]));
      written.push_back(out / name);
    }
  }
  return written;
}

// ---------------------------------------------------------------------------

void write_transfer_csv(const std::filesystem::path& path, const std::vector<TransferReport>& reports) {
  auto f = open_out(path);
  f << "surrogate,target,asr,n,seed,asr_clean_correct,n_clean_correct\n";
  for (const auto& r : reports)
    for (const auto& row : r.rows)
      f << r.surrogate << ',' << row.target << ',' << row.asr << ',' << row.n << ',' << r.seed << ','
        << row.asr_clean_correct << ',' << row.n_clean_correct << '\n';
}

void write_transfer_json(const std::filesystem::path& path, const std::vector<TransferReport>& reports,
                         const nlohmann::json& config) {
  nlohmann::json j = {{"schema_version", kReportSchemaVersion}, {"kind", "transfer"}, {"config", config}};
  j["reports"] = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows)
      rows.push_back({{"target", row.target},
                      {"asr", row.asr},
                      {"asr_clean_correct", row.asr_clean_correct},
                      {"n", row.n},
                      {"n_clean_correct", row.n_clean_correct}});
    j["reports"].push_back({{"surrogate", r.surrogate}, {"seed", r.seed}, {"rows", rows}});
  }
  write_json(path, j);
}

std::vector<TransferReport> read_transfer_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read report " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("report " + path.string() + " is not valid JSON: " + e.what());
  }
  const int version = j.value("schema_version", -1);
  if (version != kReportSchemaVersion)
    throw ConfigError("report " + path.string() + " has schema_version " + std::to_string(version) + ", expected " +
                      std::to_string(kReportSchemaVersion));
  if (j.value("kind", "") != "transfer") throw ConfigError("report " + path.string() + " is not a transfer report");
  std::vector<TransferReport> out;
  try {
    for (const auto& r : j.at("reports")) {
      TransferReport tr;
      tr.surrogate = r.at("surrogate").get<std::string>();
      tr.seed = r.at("seed").get<std::uint64_t>();
      tr.config = j.at("config");
      for (const auto& row : r.at("rows"))
        tr.rows.push_back(TransferRow{row.at("target").get<std::string>(), row.at("asr").get<double>(),
                                      row.at("asr_clean_correct").get<double>(), row.at("n").get<std::size_t>(),
                                      row.at("n_clean_correct").get<std::size_t>()});
      out.push_back(std::move(tr));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("report " + path.string() + " is missing a required field: " + e.what());
  }
  return out;
}

}  // namespace cogo
