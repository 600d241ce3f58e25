#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "ckpl/errors.hpp"
#include "ckpl/harness.hpp"
#include "ckpl/io.hpp"

using namespace ckpl;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> shots;
  std::optional<double> lambda;
  std::optional<double> tau;
  std::optional<std::size_t> prompt_length;
  std::optional<std::string> depth;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "CKPL-CONFIG-v1 file")->check(CLI::ExistingFile);
  app->add_option("--seed", o.seed, "seed for both the task and training");
  app->add_option("--out", o.out, "output directory");
  app->add_option("--shots", o.shots, "samples per class (per stage for train-e2h)");
  app->add_option("--lambda", o.lambda, "weight of the corrective-knowledge loss");
  app->add_option("--tau", o.tau, "match temperature");
  app->add_option("--prompt-length", o.prompt_length, "prompt tokens per class");
  app->add_option("--depth", o.depth, "prompt blocks: all, none, or a list like 1-2");
}

ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (o.seed) {
    c.task.seed = *o.seed;
    c.train.seed = *o.seed;
  }
  if (o.out) c.output_dir = *o.out;
  if (o.shots) c.shots = *o.shots;
  if (o.lambda) c.train.lambda = *o.lambda;
  if (o.tau) c.train.tau = *o.tau;
  if (o.prompt_length) c.train.prompt_length = *o.prompt_length;
  if (o.depth) {
    if (*o.depth == "all") {
      c.train.inject_depth.reset();
    } else {
      c.train.inject_depth = parse_depth_spec(*o.depth, c.task.num_layers).layers();
    }
  }
  c.validate();
  return c;
}

void print_summary(const RunSummary& s) {
  std::cout << "base_error " << format_real(s.base_error) << '\n';
  for (const auto& r : s.rows) {
    std::cout << r.stage << " accuracy " << format_real(r.metrics.accuracy) << " correction_rate "
              << (r.metrics.correction_rate ? format_real(*r.metrics.correction_rate) : "n/a")
              << '\n';
  }
  std::cout << "base parameters "
            << (s.base_sha256_before == s.base_sha256_after ? "unchanged" : "CHANGED") << " ("
            << s.base_sha256_after.substr(0, 16) << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"knowledge-guided prompt learning on synthetic tasks"};
  app.require_subcommand(1);

  Overrides gen_o, fs_o, e2h_o, abl_o;
  auto* gen = app.add_subcommand("gen-task", "write the synthetic task as CSV");
  add_common(gen, gen_o);
  auto* fs = app.add_subcommand("train-fewshot", "train on N random samples per class");
  add_common(fs, fs_o);
  auto* e2h = app.add_subcommand("train-e2h", "two-stage easy-to-hard curriculum");
  add_common(e2h, e2h_o);
  auto* abl = app.add_subcommand("ablate", "run the configured sweeps");
  add_common(abl, abl_o);
  std::string sweep_lambda, sweep_pl, sweep_depth;
  abl->add_option("--sweep-lambda", sweep_lambda, "comma list, e.g. 0.1,0.2,0.5,1,2");
  abl->add_option("--sweep-prompt-length", sweep_pl, "comma list of prompt lengths");
  abl->add_option("--sweep-depth", sweep_depth, "';' list of depth specs");
  std::size_t threads = 0;
  abl->add_option("--threads", threads, "parallel workers (default CKPL_THREADS or all cores)");

  auto* gc = app.add_subcommand("grad-check", "finite-difference check of the objective");
  std::uint64_t gc_seed = 0;
  std::size_t gc_instances = 5;
  gc->add_option("--seed", gc_seed, "first instance seed");
  gc->add_option("--instances", gc_instances, "number of seeded instances");

  auto* ev = app.add_subcommand("eval", "re-evaluate a finished run directory");
  std::string run_dir;
  ev->add_option("run_dir", run_dir, "directory written by train-*")->required()->check(
      CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      auto c = resolve(gen_o);
      const auto path = std::filesystem::path(c.output_dir) / "task.csv";
      auto s = write_task(c.task, path);
      std::cout << "wrote " << path.string() << ": " << s.train_size << " train, " << s.test_size
                << " test, hard-tail share " << format_real(s.hard_tail_share)
                << ", base error " << format_real(s.base_error) << '\n';
    } else if (*fs) {
      auto c = resolve(fs_o);
      c.mode = Mode::kFewshot;
      print_summary(run(c));
    } else if (*e2h) {
      auto c = resolve(e2h_o);
      c.mode = Mode::kEasyToHard;
      print_summary(run(c));
    } else if (*abl) {
      auto c = resolve(abl_o);
      ExperimentConfig probe;
      if (!sweep_lambda.empty() || !sweep_pl.empty() || !sweep_depth.empty()) {
        // reuse the config parser for the list syntax
        std::string text = std::string(kConfigHeader) + "\n";
        if (!sweep_lambda.empty()) text += "sweep.lambda = " + sweep_lambda + "\n";
        if (!sweep_pl.empty()) text += "sweep.prompt_length = " + sweep_pl + "\n";
        if (!sweep_depth.empty()) text += "sweep.inject_depth = " + sweep_depth + "\n";
        std::istringstream is(text);
        probe = read_config(is);
        if (probe.sweep_lambda) c.sweep_lambda = probe.sweep_lambda;
        if (probe.sweep_prompt_length) c.sweep_prompt_length = probe.sweep_prompt_length;
        if (probe.sweep_depth) c.sweep_depth = probe.sweep_depth;
      }
      for (const auto& row : ablate(c, threads)) {
        for (const auto& r : row.summary.rows) {
          std::cout << row.sweep << '=' << row.value << ' ' << r.stage << " accuracy "
                    << format_real(r.metrics.accuracy) << '\n';
        }
      }
    } else if (*gc) {
      bool ok = true;
      for (std::size_t i = 0; i < gc_instances; ++i) {
        auto r = check_objective_gradients(gc_seed + i);
        std::cout << "instance " << gc_seed + i << " ckg " << format_report(r.ckg) << '\n'
                  << "instance " << gc_seed + i << " total " << format_report(r.total) << '\n';
        ok = ok && r.ckg.passed() && r.total.passed();
      }
      std::cout << (ok ? "PASS" : "FAIL") << '\n';
      return ok ? 0 : 1;
    } else if (*ev) {
      auto m = evaluate_run(run_dir);
      std::cout << "accuracy " << format_real(m.accuracy) << " correction_rate "
                << (m.correction_rate ? format_real(*m.correction_rate) : "n/a") << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "ckpl: error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
