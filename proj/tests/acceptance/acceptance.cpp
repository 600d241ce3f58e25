// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>

#include "ckpl/corrective_knowledge.hpp"
#include "ckpl/curriculum.hpp"
#include "ckpl/harness.hpp"
#include "ckpl/io.hpp"
#include "ckpl/ops.hpp"
#include "ckpl/params.hpp"
#include "ckpl/random.hpp"
#include "ckpl/selection.hpp"
#include "ckpl/two_stage.hpp"

using namespace ckpl;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path work_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / "ckpl_acceptance" / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

ExperimentConfig default_run(std::uint64_t seed, Mode mode, std::size_t shots, const std::string& dir) {
  ExperimentConfig c;
  c.task.seed = seed;
  c.train.seed = seed;
  c.mode = mode;
  c.shots = shots;
  c.output_dir = work_dir(dir).string();
  return c;
}

void gradient_fidelity() {
  auto t0 = Clock::now();
  bool ok = true;
  double worst_ckg = 0.0, worst_total = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    auto r = check_objective_gradients(seed, 1e-4, 1e-3);
    ok = ok && r.ckg.passed() && r.total.passed();
    worst_ckg = std::max(worst_ckg, r.ckg.max_rel_error);
    worst_total = std::max(worst_total, r.total.max_rel_error);
  }
  double secs = seconds_since(t0);
  report(1, "gradient fidelity", ok && secs < 60.0,
         fmt("50 instances, max rel ckg %.2e (tol 1e-4), total %.2e (tol 1e-3), %.1f s (limit 60)",
             worst_ckg, worst_total, secs));
}

void closed_form_losses() {
  double correct = ckg_loss({Tensor::vector({1.0, 0.0}), 0.1}, 0, 0).item() + 0.0;
  double half = ckg_loss({Tensor::vector({0.5, 0.5}), 0.1}, 0, 1).item();
  Tensor saturated = softmax_with_temperature(Tensor::vector({-1.0, 1.0}), 0.01);
  double floored = ckg_loss({saturated, 0.01}, 0, 1).item();
  double floored_oracle = std::log1p(std::exp(200.0)) - std::log(kCkgEpsilon);
  double e1 = std::abs(correct - 0.0);
  double e2 = std::abs(half - 1.38629436);
  double e3 = std::abs(floored - floored_oracle);
  bool ok = e1 < 1e-6 && e2 < 1e-6 && std::isfinite(floored) && e3 < 1e-6;
  report(2, "closed-form ckg values", ok,
         fmt("%.9f, %.9f, %.6f (oracle %.6f); max error %.1e (tol 1e-6)", correct, half, floored,
             floored_oracle, std::max({e1, e2, e3})));
}

void normalization() {
  Rng rng(2024);
  double worst = 0.0;
  for (int call = 0; call < 10000; ++call) {
    std::size_t s = 1 + rng.index(10), d = 2 + rng.index(15), len = 1 + rng.index(3);
    std::vector<PromptEntry> entries;
    std::vector<std::size_t> map(s);
    std::iota(map.begin(), map.end(), 0);
    for (std::size_t j = 0; j < s; ++j) {
      entries.push_back({l2_normalize(rng.gaussian({d}, 1.0)), rng.gaussian({len, d}, 0.5)});
    }
    KnowledgePromptSet set(std::move(entries), map);
    Tensor m = rng.gaussian({d}, rng.uniform(0.1, 10.0));
    double tau = std::exp(rng.uniform(std::log(0.01), std::log(5.0)));
    auto dist = match_distribution(m, set, tau);
    auto agg = aggregate_prompt(m, set, tau);
    double sp = 0.0, sw = 0.0;
    for (std::size_t j = 0; j < s; ++j) {
      sp += dist.probs[j];
      sw += agg.weights[j];
    }
    worst = std::max({worst, std::abs(sp - 1.0), std::abs(sw - 1.0)});
  }
  report(3, "normalization invariants", worst < 1e-9,
         fmt("10000 calls, max |sum - 1| = %.2e (tol 1e-9)", worst));
}

void frozen_contract() {
  auto task = prepare_task(generate_task(SyntheticTaskSpec{}));
  auto view = base_view(task);
  auto config = ExperimentConfig::desk_train_config();
  config.epochs = 50;
  auto ids = sample_shots(labels_of(task.train), task.num_classes(), 16, 1).flatten();
  const auto before = params_sha256(task.base->parameters());
  auto result = run_single_stage(task, view, config, ids, "fewshot");
  const auto after = params_sha256(task.base->parameters());
  bool ok = before == after && result.outcome.log.size() == 50;
  report(4, "frozen contract", ok,
         fmt("%zu epochs, base sha256 %.16s... before, %.16s... after", result.outcome.log.size(),
             before.c_str(), after.c_str()));
}

void correction_capability() {
  auto t0 = Clock::now();
  double sum_err = 0.0, sum_rate = 0.0, min_err = 1.0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto c = default_run(seed, Mode::kFewshot, 16, "correction_" + std::to_string(seed));
    auto s = run(c);
    double rate = s.rows.at(0).metrics.correction_rate.value_or(0.0);
    sum_err += s.base_error;
    sum_rate += rate;
    min_err = std::min(min_err, s.base_error);
    per_seed += fmt(" %.3f/%.3f", s.base_error, rate);
  }
  double secs = seconds_since(t0);
  double mean_err = sum_err / 5, mean_rate = sum_rate / 5;
  bool ok = mean_err >= 0.30 && mean_rate >= 0.50 && secs < 600.0;
  report(5, "correction capability", ok,
         fmt("seeds 1-5 fewshot 16: mean base error %.3f (>= 0.30, min %.3f), mean correction rate "
             "%.3f (>= 0.50), %.1f s (limit 600); per seed err/rate:",
             mean_err, min_err, mean_rate, secs) +
             per_seed);
}

void easy_to_hard() {
  auto t0 = Clock::now();
  double sum_gain = 0.0;
  int wins = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto c = default_run(seed, Mode::kEasyToHard, 8, "e2h_" + std::to_string(seed));
    auto s = run(c);
    double gain = s.rows.at(1).metrics.accuracy - s.rows.at(0).metrics.accuracy;
    sum_gain += gain;
    wins += gain >= 0.0;
    per_seed += fmt(" %+.3f", gain);
  }
  double secs = seconds_since(t0);
  double mean_gain = sum_gain / 10;
  bool ok = mean_gain > 0.0 && wins >= 7 && secs < 1200.0;
  report(6, "easy-to-hard improvement", ok,
         fmt("seeds 1-10 N=8: mean acc(h) - acc(e) %+.4f (> 0), h >= e in %d/10 (>= 7), %.1f s "
             "(limit 1200); gains:",
             mean_gain, wins, secs) +
             per_seed);
}

void ablation_plumbing() {
  auto c = default_run(1, Mode::kFewshot, 16, "ablation");
  c.sweep_lambda = std::vector<double>{0.1, 0.2, 0.5, 1.0, 2.0};
  c.sweep_prompt_length = std::vector<std::size_t>{1, 2, 4};
  auto rows = ablate(c);
  std::size_t lambda_rows = 0, length_rows = 0;
  bool ok = true;
  for (const auto& r : rows) {
    lambda_rows += r.sweep == "lambda";
    length_rows += r.sweep == "prompt_length";
    auto csv = parse_csv(slurp(fs::path(c.output_dir) / (r.sweep + "_" + r.value) / "metrics.csv"));
    ok = ok && csv.size() == 2 && r.summary.rows.size() == 1;
  }
  auto table = parse_csv(slurp(fs::path(c.output_dir) / "ablation.csv"));
  ok = ok && lambda_rows == 5 && length_rows == 3 && table.size() == 1 + rows.size();
  report(7, "ablation plumbing", ok,
         fmt("lambda sweep %zu/5 rows, prompt-length sweep %zu/3 rows, ablation.csv %zu data rows",
             lambda_rows, length_rows, table.size() - 1));
}

// Plain loops, nothing shared with the library beyond the inputs.
struct OracleInstance {
  std::vector<Tensor> features;
  std::vector<std::size_t> labels;
  std::size_t classes;
};

OracleInstance oracle_instance(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 8));
  OracleInstance inst;
  inst.classes = 2 + rng.index(5);
  std::size_t n = 40 + rng.index(161);
  std::size_t d = 3 + rng.index(14);
  std::vector<Tensor> means;
  for (std::size_t k = 0; k < inst.classes; ++k) means.push_back(rng.gaussian({d}, 1.0));
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k = i < inst.classes ? i : rng.index(inst.classes);
    std::vector<double> v(d);
    for (std::size_t j = 0; j < d; ++j) v[j] = means[k][j] + rng.normal(0.0, 0.9);
    inst.features.push_back(Tensor::vector(v));
    inst.labels.push_back(k);
  }
  return inst;
}

double oracle_cos(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (std::sqrt(na) < 1e-12 || std::sqrt(nb) < 1e-12) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

void oracle_equivalence() {
  std::size_t mismatches = 0, checked = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto inst = oracle_instance(seed);
    const std::size_t n = inst.labels.size(), d = inst.features[0].size(), c = inst.classes;
    std::vector<std::vector<double>> mean(c, std::vector<double>(d, 0.0));
    std::vector<std::size_t> count(c, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++count[inst.labels[i]];
      for (std::size_t j = 0; j < d; ++j) mean[inst.labels[i]][j] += inst.features[i][j];
    }
    for (std::size_t k = 0; k < c; ++k) {
      for (auto& v : mean[k]) v /= static_cast<double>(count[k]);
    }
    auto centroids = class_centroids(inst.features, inst.labels, c);

    auto preds = predict_base(inst.features, centroids);
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> f(inst.features[i].values().begin(), inst.features[i].values().end());
      std::size_t best = 0;
      for (std::size_t k = 1; k < c; ++k) {
        if (oracle_cos(f, mean[k]) > oracle_cos(f, mean[best])) best = k;
      }
      mismatches += preds[i] != best;
      dist[i] = 1.0 - oracle_cos(f, mean[inst.labels[i]]);
    }

    // the ranking itself: sorted order of D within each class
    auto scores = difficulty_scores(inst.features, inst.labels, centroids);
    std::size_t n_sel = 1 + seed % 12;
    auto easy = select_easy(inst.features, inst.labels, centroids, n_sel);
    auto hard = select_hard(inst.features, inst.labels, centroids, n_sel);
    for (std::size_t k = 0; k < c; ++k) {
      std::vector<std::size_t> ids;
      for (std::size_t i = 0; i < n; ++i) {
        if (inst.labels[i] == k) ids.push_back(i);
      }
      auto by_lib = ids, by_oracle = ids;
      std::stable_sort(by_lib.begin(), by_lib.end(),
                       [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
      std::stable_sort(by_oracle.begin(), by_oracle.end(),
                       [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
      mismatches += by_lib != by_oracle;
      auto easy_oracle = by_oracle;
      easy_oracle.resize(std::min(n_sel, ids.size()));
      auto hard_oracle = ids;
      std::stable_sort(hard_oracle.begin(), hard_oracle.end(),
                       [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
      hard_oracle.resize(std::min(n_sel, ids.size()));
      mismatches += easy.per_class[k] != easy_oracle;
      mismatches += hard.per_class[k] != hard_oracle;
    }
    checked += n;
  }
  report(8, "oracle equivalence", mismatches == 0,
         fmt("20 instances, %zu samples, %zu mismatches in predictions, rankings and selections",
             checked, mismatches));
}

void determinism() {
  auto a = default_run(3, Mode::kFewshot, 16, "determinism_a");
  auto b = default_run(3, Mode::kFewshot, 16, "determinism_b");
  run(a);
  run(b);
  auto ma = slurp(fs::path(a.output_dir) / "metrics.csv");
  auto mb = slurp(fs::path(b.output_dir) / "metrics.csv");
  report(9, "determinism", !ma.empty() && ma == mb,
         fmt("two runs, metrics.csv %zu bytes, byte-identical: %s", ma.size(), ma == mb ? "yes" : "no"));
}

void degenerate_curriculum() {
  auto task = prepare_task(generate_task(SyntheticTaskSpec{}));
  auto config = ExperimentConfig::desk_train_config();
  config.lr_initial = config.lr_final = config.lr_initial_hard_stage = 0.0;
  auto r = run_two_stage(task, config, 8);
  bool ok = r.metrics_e == r.metrics_h;
  report(10, "curriculum degenerate case", ok,
         fmt("zero learning rates: acc e %.4f, acc h %.4f, metrics identical: %s",
             r.metrics_e.accuracy, r.metrics_h.accuracy, ok ? "yes" : "no"));
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<void()>> criteria[] = {
      {"gradient fidelity", gradient_fidelity},
      {"closed-form ckg values", closed_form_losses},
      {"normalization invariants", normalization},
      {"frozen contract", frozen_contract},
      {"correction capability", correction_capability},
      {"easy-to-hard improvement", easy_to_hard},
      {"ablation plumbing", ablation_plumbing},
      {"oracle equivalence", oracle_equivalence},
      {"determinism", determinism},
      {"curriculum degenerate case", degenerate_curriculum},
  };
  int id = 0;
  for (const auto& [name, fn] : criteria) {
    ++id;
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, name, false, std::string("exception: ") + e.what());
    }
  }
  std::printf("%d of 10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
