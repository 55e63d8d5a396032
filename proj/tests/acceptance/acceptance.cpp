// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
// Trained checkpoints are cached under --cache so repeated runs only pay for
// the attacks. Every adversarial batch generated for criteria 6-8 is also
// checked against the perturbation budget and folded into criterion 5.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cogo/analysis.hpp"
#include "cogo/attack.hpp"
#include "cogo/dataset.hpp"
#include "cogo/frequency.hpp"
#include "cogo/harness.hpp"
#include "cogo/log.hpp"
#include "cogo/parallel.hpp"
#include "cogo/suppression.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace cogo;

namespace {

constexpr Variant kVariants[] = {Variant::vit_tiny, Variant::deit_tiny, Variant::hybrid_tiny};
constexpr std::uint64_t kSeeds[] = {0, 1, 2};
constexpr double kBudget = 8.0 / 255.0 + 1e-6;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

struct Outcome {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
};

void report(const Outcome& o) {
  std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << o.id << " (" << o.name << "): " << o.detail << std::endl;
}

// ---------------------------------------------------------------------------
// 1-4: exact oracles

Outcome dct_criterion() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst_round = 0.0, worst_parseval = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Array x = gradcheck::random_array({3, 32, 32}, rng, 0.0f, 1.0f);
    const SpectrumTensor s = dct2(x);
    const Array back = idct2(s);
    double ex = 0.0, es = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      worst_round = std::max(worst_round, std::abs(static_cast<double>(back[k]) - x[k]));
      ex += static_cast<double>(x[k]) * x[k];
      es += static_cast<double>(s.coeffs[k]) * s.coeffs[k];
    }
    worst_parseval = std::max(worst_parseval, std::abs(es - ex) / ex);
  }
  double worst_direct = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Array x = gradcheck::random_array({3, 8, 8}, rng);
    const SpectrumTensor s = dct2(x);
    for (std::size_t c = 0; c < 3; ++c) {
      const std::vector<double> plane(x.data.begin() + c * 64, x.data.begin() + (c + 1) * 64);
      const auto ref = oracle::direct_dct2(plane, 8, 8);
      for (std::size_t k = 0; k < 64; ++k)
        worst_direct = std::max(worst_direct, std::abs(static_cast<double>(s.coeffs[c * 64 + k]) - ref[k]));
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = worst_round < 1e-4 && worst_parseval < 1e-4 && worst_direct < 1e-4 && secs < 10.0;
  return {1, "DCT correctness", ok,
          "round-trip max err " + sci(worst_round) + ", Parseval rel err " + sci(worst_parseval) +
              ", 8x8 direct-formula err " + sci(worst_direct) + " (limits 1e-4), " + fmt(secs) + " s (limit 10 s)"};
}

Outcome autodiff_criterion() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  for (const auto& c : gradcheck::primitive_cases())
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const double e = gradcheck::check_case(c, seed);
      if (e > worst) {
        worst = e;
        worst_name = c.name;
      }
    }
  ModelSpec spec;
  spec.variant = Variant::vit_tiny;
  double worst_model = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) worst_model = std::max(worst_model, gradcheck::check_model(spec, seed));
  const double secs = seconds_since(t0);
  const bool ok = worst < 1e-2 && worst_model < 1e-2 && secs < 60.0;
  return {2, "autodiff correctness", ok,
          "worst primitive rel err " + sci(worst) + " (" + worst_name + "), vit_tiny loss rel err " + sci(worst_model) +
              " over 20 seeds (limit 1e-2), " + fmt(secs) + " s (limit 60 s)"};
}

Outcome suppression_criterion() {
  const auto t0 = Clock::now();
  Rng gen(303);
  std::size_t weight_mismatch = 0, output_mismatch = 0, counter_mismatch = 0, out_of_range = 0;
  for (int t = 0; t < 100; ++t) {
    const auto c = oracle::random_suppression_case(gen);
    const std::uint64_t seed = gen.next_u64();
    Rng r1(seed), r2(seed);
    const auto w = suppression_weights(c.grad, c.cfg, r1);
    const auto ref = oracle::suppress_by_hand(c.grad, c.cfg, c.layout, r2);
    weight_mismatch += w.weights != ref.weights;
    counter_mismatch += r1.counter() != r2.counter();
    for (float x : w.weights) out_of_range += !(x >= 0.1f && x <= 1.0f);

    const GradHook hook = make_is_hook(c.cfg, c.layout, Rng(seed));
    Rng r3(seed);
    output_mismatch += !(hook(c.grad) == oracle::suppress_by_hand(c.grad, c.cfg, c.layout, r3).output);
  }
  const double secs = seconds_since(t0);
  const bool ok = weight_mismatch == 0 && output_mismatch == 0 && counter_mismatch == 0 && out_of_range == 0 && secs < 10.0;
  return {3, "IS oracle equivalence", ok,
          "100 cases: " + std::to_string(weight_mismatch) + " weight mismatches, " + std::to_string(output_mismatch) +
              " hook-output mismatches, " + std::to_string(counter_mismatch) + " rng divergences, " +
              std::to_string(out_of_range) + " weights outside [0.1,1], " + fmt(secs) + " s (limit 10 s)"};
}

std::vector<float> normal_vec(Rng& rng, std::size_t n) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

std::pair<std::vector<float>, std::vector<float>> random_pair(Rng& rng) {
  const std::size_t n = 20 + rng.below(281);
  const float r = rng.uniform(-1.0f, 1.0f);
  auto a = normal_vec(rng, n), b = normal_vec(rng, n);
  for (std::size_t k = 0; k < n; ++k) b[k] = r * a[k] + std::sqrt(1.0f - r * r) * b[k];
  return {a, b};
}

Outcome statistics_criterion() {
  Rng rng(404);
  double worst_r = 0.0, worst_mi = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const auto [a, b] = random_pair(rng);
    const std::size_t bins = 2 + rng.below(31);
    worst_r = std::max(worst_r, std::abs(static_cast<double>(pearson(a, b)) - oracle::pearson(a, b)));
    worst_mi = std::max(worst_mi, std::abs(static_cast<double>(mutual_info(a, b, bins)) - oracle::mutual_info(a, b, bins)));
  }

  std::size_t self_mismatch = 0;
  double worst_entropy = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const auto g = normal_vec(rng, 20 + rng.below(281));
    const std::size_t bins = 2 + rng.below(31);
    self_mismatch += mutual_info(g, g, bins) != static_cast<float>(histogram_entropy(g, bins));
    worst_entropy = std::max(worst_entropy, std::abs(histogram_entropy(g, bins) - oracle::entropy(g, bins)));
  }

  // Rescaling by arbitrary positive constants: statistics per pair, and the
  // indicator bits and weights of whole gradient tensors.
  double worst_scaled = 0.0;
  std::size_t indicator_changes = 0, weight_changes = 0;
  for (int t = 0; t < 100; ++t) {
    auto [a, b] = random_pair(rng);
    const float s = std::exp(rng.uniform(-7.0f, 7.0f));
    auto as = a, bs = b;
    for (auto& v : as) v *= s;
    for (auto& v : bs) v *= s;
    worst_scaled = std::max(worst_scaled, static_cast<double>(std::abs(pearson(as, bs) - pearson(a, b))));
    worst_scaled = std::max(worst_scaled, static_cast<double>(std::abs(mutual_info(as, bs, 16) - mutual_info(a, b, 16))));

    auto c = oracle::random_suppression_case(rng);
    c.cfg.threshold_mode = ThresholdMode::adaptive;
    Array scaled = c.grad;
    for (auto& v : scaled.data) v *= s;
    Rng r1(t), r2(t);
    const auto base = analyze_redundancy(c.grad, c.cfg, r1);
    const auto moved = analyze_redundancy(scaled, c.cfg, r2);
    for (std::size_t k = 0; k < base.indicators.size(); ++k)
      indicator_changes += base.indicators[k].t_mi != moved.indicators[k].t_mi ||
                           base.indicators[k].t_corr != moved.indicators[k].t_corr;
    weight_changes += base.weights.weights != moved.weights.weights;
  }
  const bool ok = worst_r <= 1e-6 && worst_mi <= 1e-6 && self_mismatch == 0 && worst_entropy <= 1e-6 &&
                  worst_scaled <= 1e-6 && indicator_changes == 0 && weight_changes == 0;
  return {4, "statistics oracles", ok,
          "pearson err " + sci(worst_r) + ", MI err " + sci(worst_mi) + " on 1000 pairs (limit 1e-6); MI(g,g) != entropy in " +
              std::to_string(self_mismatch) + "/1000; 100 rescaled pairs: stat drift " + sci(worst_scaled) + ", " +
              std::to_string(indicator_changes) + " indicator flips, " + std::to_string(weight_changes) +
              " weight changes"};
}

// ---------------------------------------------------------------------------
// 5-9: trained models

struct Budget {
  double worst_linf = 0.0;
  std::size_t out_of_range = 0;
  std::size_t images = 0;

  void check(const Array& x_adv, const Array& x_clean) {
    const std::size_t numel = x_clean.size();
    for (std::size_t k = 0; k < numel; ++k) {
      const float a = x_adv[k];
      worst_linf = std::max(worst_linf, std::abs(static_cast<double>(a) - x_clean[k]));
      out_of_range += !(a >= 0.0f && a <= 1.0f);
    }
  }
};

struct Run {
  std::vector<std::vector<int>> preds;  // per target model, per image
  double seconds = 0.0;
};

class Lab {
 public:
  Lab(fs::path cache, std::size_t threads) : cache_(std::move(cache)), threads_(threads) {}

  void prepare() {
    fs::create_directories(cache_);
    for (Variant v : kVariants) {
      const fs::path ckpt = cache_ / (to_string(v) + ".ckpt");
      if (!fs::exists(ckpt)) {
        std::cout << "info: training " << to_string(v) << " into " << ckpt.string() << std::endl;
        TrainRequest req;
        req.variant = v;
        req.train_data = "procedural:0:200:train";
        req.val_data = "procedural:0:50:val";
        req.config.epochs = 30;
        req.config.seed = 0;
        req.out_checkpoint = ckpt;
        cmd_train(req);
      }
      const Checkpoint c = load_checkpoint(ckpt);
      std::cout << "info: " << to_string(v) << " val accuracy " << fmt(100.0 * c.meta.final_accuracy)
                << "% after " << c.meta.epochs << " epochs (gate >= 85%)" << std::endl;
      models_.push_back(load_model(ckpt));
    }
    eval_ = load_dataset("procedural:0:20:eval");
    std::cout << "info: " << eval_.size() << " eval images" << std::endl;
  }

  std::size_t n_models() const { return models_.size(); }
  const Model& model(std::size_t i) const { return models_[i].model; }
  const std::string& name(std::size_t i) const { return models_[i].id; }
  const Dataset& eval() const { return eval_; }
  std::size_t threads() const { return threads_; }
  Budget& budget() { return budget_; }

  // Adversarial examples of the first `n` eval images crafted on surrogate
  // `s`, classified by every model. Memoized by (label, s, seed, n).
  const Run& run(const std::string& label, AttackMethod method, const AttackConfig& cfg, std::size_t s,
                 std::uint64_t seed, std::size_t n) {
    std::ostringstream key;
    key << label << '|' << s << '|' << seed << '|' << n;
    if (auto it = runs_.find(key.str()); it != runs_.end()) return it->second;

    const Dataset data = eval_.head(n);
    AttackConfig c = cfg;
    c.seed = seed;
    const auto t0 = Clock::now();
    const Array x_adv = generate_adversarial(data, make_attack_factory(method, c)(model(s), seed), threads_);
    Run r;
    r.seconds = seconds_since(t0);
    budget_.check(x_adv, data.images);
    budget_.images += data.size();
    for (std::size_t t = 0; t < n_models(); ++t) r.preds.push_back(classify(model(t), x_adv));
    return runs_.emplace(key.str(), std::move(r)).first->second;
  }

  double asr(const Run& r, std::size_t target, std::size_t n) const {
    return attack_success_rate(std::span(r.preds[target]).first(n), std::span(eval_.labels).first(n));
  }

  // Mean ASR over the targets other than the surrogate.
  double heldout_asr(const Run& r, std::size_t s, std::size_t n) const {
    std::vector<double> v;
    for (std::size_t t = 0; t < n_models(); ++t)
      if (t != s) v.push_back(asr(r, t, n));
    return mean(v);
  }

  // Per-seed transfer ASR, each averaged over surrogates and held-out targets.
  std::vector<double> transfer(const std::string& label, AttackMethod method, const AttackConfig& cfg, std::size_t n,
                               std::size_t eval_n) {
    std::vector<double> per_seed;
    for (std::uint64_t seed : kSeeds) {
      std::vector<double> v;
      for (std::size_t s = 0; s < n_models(); ++s) v.push_back(heldout_asr(run(label, method, cfg, s, seed, n), s, eval_n));
      per_seed.push_back(mean(v));
    }
    return per_seed;
  }

 private:
  fs::path cache_;
  std::size_t threads_;
  std::vector<LoadedModel> models_;
  Dataset eval_;
  std::map<std::string, Run> runs_;
  Budget budget_;
};

Outcome whitebox_criterion(Lab& lab) {
  const AttackConfig cfg;
  std::string detail;
  bool ok = true;
  for (std::size_t s = 0; s < lab.n_models(); ++s) {
    const Run& r = lab.run("cogo", AttackMethod::cogo, cfg, s, 0, lab.eval().size());
    const double a = lab.asr(r, s, lab.eval().size());
    ok = ok && a >= 95.0 && r.seconds < 600.0;
    detail += (s ? "; " : "") + lab.name(s) + " " + fmt(a) + "% in " + fmt(r.seconds, 0) + " s";
  }
  return {6, "white-box efficacy", ok, detail + " (limits >= 95%, < 600 s per model)"};
}

Outcome transfer_criterion(Lab& lab) {
  const AttackConfig cfg;
  const std::size_t n = lab.eval().size();
  const auto t0 = Clock::now();
  std::string detail;
  bool ok = true;
  for (std::size_t s = 0; s < lab.n_models(); ++s) {
    // MIM draws nothing at random, so one run serves all three seeds.
    const Run& mim = lab.run("mim", AttackMethod::mim, cfg, s, 0, n);
    std::vector<double> cogo_v;
    std::string pairs;
    for (std::size_t t = 0; t < lab.n_models(); ++t) {
      if (t == s) continue;
      std::vector<double> per_seed;
      for (std::uint64_t seed : kSeeds) per_seed.push_back(lab.asr(lab.run("cogo", AttackMethod::cogo, cfg, s, seed, n), t, n));
      cogo_v.push_back(mean(per_seed));
      pairs += " ->" + lab.name(t) + " " + fmt(mean(per_seed)) + " vs " + fmt(lab.asr(mim, t, n));
    }
    const double gap = mean(cogo_v) - lab.heldout_asr(mim, s, n);
    ok = ok && gap >= 5.0;
    detail += (s ? "; " : "") + lab.name(s) + " gap " + fmt(gap) + " pts [" + pairs.substr(1) + "]";
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 3600.0;
  return {7, "transfer trend", ok, detail + " (limit >= 5 pts), " + fmt(secs, 0) + " s (limit 3600 s)"};
}

std::string series(const std::vector<double>& v) {
  return fmt(mean(v)) + "+-" + fmt(sample_std(v));
}

Outcome ablation_criterion(Lab& lab) {
  const std::size_t n = lab.eval().size();
  const AttackConfig full;
  AttackConfig ce_only = full;
  ce_only.is.reset();
  const AttackConfig is_only = without_ce(full);
  const AttackConfig neither = mim_equivalent(full);

  const auto v_full = lab.transfer("cogo", AttackMethod::cogo, full, n, n);
  const auto v_ce = lab.transfer("ce", AttackMethod::cogo, ce_only, n, n);
  const auto v_is = lab.transfer("is", AttackMethod::cogo, is_only, n, n);
  const auto v_none = lab.transfer("neither", AttackMethod::cogo, neither, n, n);

  // (a) each paired gap must be non-negative within one std over seeds.
  bool ok_a = true;
  auto gap_ok = [&](const std::vector<double>& hi, const std::vector<double>& lo) {
    std::vector<double> d;
    for (std::size_t k = 0; k < hi.size(); ++k) d.push_back(hi[k] - lo[k]);
    const bool ok = mean(d) >= -sample_std(d);
    ok_a = ok_a && ok;
    return fmt(mean(d)) + (ok ? "" : "!");
  };
  const std::string gaps = gap_ok(v_full, v_ce) + ", " + gap_ok(v_ce, v_is) + ", " + gap_ok(v_is, v_none);

  // (b)
  AttackConfig g0 = full;
  g0.ce.gamma = 0.0f;
  const auto v_g0 = lab.transfer("gamma0", AttackMethod::cogo, g0, n, n);
  const bool ok_b = mean(v_full) >= mean(v_g0);

  // (c) on the first 100 images
  const std::size_t m = std::min<std::size_t>(100, n);
  std::vector<double> sweep;
  std::string sweep_s;
  for (std::size_t p : {1u, 3u, 5u, 9u}) {
    AttackConfig c = full;
    c.is->n_pairs = p;
    const auto v = p == full.is->n_pairs ? lab.transfer("cogo", AttackMethod::cogo, full, n, m)
                                         : lab.transfer("pairs" + std::to_string(p), AttackMethod::cogo, c, m, m);
    sweep.push_back(mean(v));
    sweep_s += (sweep_s.empty() ? "" : "/") + fmt(mean(v));
  }
  const double spread = *std::max_element(sweep.begin(), sweep.end()) - *std::min_element(sweep.begin(), sweep.end());
  const bool ok_c = spread < 2.0;

  return {8, "ablation orderings", ok_a && ok_b && ok_c,
          std::string("(a) ") + (ok_a ? "ok" : "violated") + ": CE+IS " + series(v_full) + ", CE " + series(v_ce) +
              ", IS " + series(v_is) + ", neither " + series(v_none) + ", mean gaps " + gaps +
              "; (b) " + (ok_b ? "ok" : "violated") + ": gamma=1 " + series(v_full) + " vs gamma=0 " + series(v_g0) +
              "; (c) " + (ok_c ? "ok" : "violated") + ": n_pairs 1/3/5/9 = " + sweep_s + ", spread " + fmt(spread) +
              " pts (limit < 2)"};
}

Outcome dispersion_criterion(Lab& lab) {
  std::size_t deit = 0;
  for (std::size_t i = 0; i < lab.n_models(); ++i)
    if (lab.model(i).spec().variant == Variant::deit_tiny) deit = i;
  const Dataset data = lab.eval().head(100);
  const auto p = dispersion_profile(lab.model(deit), data.images, data.labels, AttackConfig{}, lab.threads());
  std::size_t up = 0;
  std::string blocks;
  for (std::size_t b = 0; b < p.pre.size(); ++b) {
    up += p.post[b] > p.pre[b];
    blocks += (b ? ", " : "") + fmt(p.pre[b], 4) + "->" + fmt(p.post[b], 4);
  }
  return {9, "dispersion trend", 2 * up > p.pre.size(),
          std::to_string(up) + "/" + std::to_string(p.pre.size()) + " deit_tiny blocks increase over 100 images [" +
              blocks + "]"};
}

Outcome budget_criterion(Lab& lab) {
  // 500 images, the four CE/IS corners, surrogates taken in turn.
  const Dataset data = load_dataset("procedural:0:50:eval");
  const AttackConfig full;
  AttackConfig ce_only = full;
  ce_only.is.reset();
  const std::vector<AttackConfig> corners = {full, ce_only, without_ce(full), mim_equivalent(full)};

  Budget& budget = lab.budget();
  std::size_t mismatches = 0;
  for (const auto& cfg : corners) {
    std::vector<Array> adv(data.size());
    parallel_for(
        data.size(),
        [&](std::size_t i) {
          adv[i] = cogo_attack(lab.model(i % lab.n_models()), data.image(i), data.labels[i], cfg, i).x_adv;
        },
        lab.threads());
    for (std::size_t i = 0; i < data.size(); ++i) budget.check(adv[i], data.image(i));
    budget.images += data.size();
  }
  std::vector<char> same(data.size(), 0);
  const AttackConfig degenerate = mim_equivalent(full);
  parallel_for(
      data.size(),
      [&](std::size_t i) {
        const Model& m = lab.model(i % lab.n_models());
        const Array img = data.image(i);
        same[i] = cogo_attack(m, img, data.labels[i], degenerate, i).x_adv == mim_attack(m, img, data.labels[i], full).x_adv;
      },
      lab.threads());
  for (char s : same) mismatches += !s;

  const bool ok = budget.worst_linf <= kBudget && budget.out_of_range == 0 && mismatches == 0;
  return {5, "budget and reduction invariants", ok,
          std::to_string(budget.images) + " attacked images: max linf " + fmt(budget.worst_linf * 255.0, 4) +
              "/255 (limit 8/255 + 1e-6), " + std::to_string(budget.out_of_range) + " pixels outside [0,1]; degenerate COGO != MIM on " +
              std::to_string(mismatches) + "/" + std::to_string(data.size()) + " images"};
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"COGO acceptance criteria"};
  std::string cache = "acceptance_cache";
  std::string only;
  std::size_t threads = 0;
  app.add_option("--cache", cache, "directory for trained checkpoints");
  app.add_option("--only", only, "comma-separated criterion numbers to run (default all)");
  app.add_option("--threads", threads, "worker threads (default: all cores)");
  CLI11_PARSE(app, argc, argv);
  set_log_level(LogLevel::info);

  std::set<int> wanted;
  {
    std::stringstream in(only);
    std::string item;
    while (std::getline(in, item, ','))
      if (!item.empty()) wanted.insert(std::stoi(item));
  }
  auto want = [&](int id) { return wanted.empty() || wanted.count(id) > 0; };

  std::vector<Outcome> results;
  auto record = [&](Outcome o) {
    report(o);
    results.push_back(std::move(o));
  };

  try {
    if (want(1)) record(dct_criterion());
    if (want(2)) record(autodiff_criterion());
    if (want(3)) record(suppression_criterion());
    if (want(4)) record(statistics_criterion());
    if (want(5) || want(6) || want(7) || want(8) || want(9)) {
      Lab lab(cache, threads);
      lab.prepare();
      if (want(6)) record(whitebox_criterion(lab));
      if (want(7)) record(transfer_criterion(lab));
      if (want(8)) record(ablation_criterion(lab));
      if (want(9)) record(dispersion_criterion(lab));
      if (want(5)) record(budget_criterion(lab));
    }
  } catch (const std::exception& e) {
    std::cout << "FAIL  aborted: " << e.what() << std::endl;
    return 1;
  }

  std::sort(results.begin(), results.end(), [](const Outcome& a, const Outcome& b) { return a.id < b.id; });
  std::cout << "\nsummary\n";
  bool all = true;
  for (const auto& o : results) {
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << o.id << " " << o.name << "\n";
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
